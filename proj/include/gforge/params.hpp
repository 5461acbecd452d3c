// SPDX-License-Identifier: Apache-2.0
//
// Model parameters for the degenerate operator
//
//   D_x^2 + (x^(2n+1) D_y)^2 + (x^n y^m D_y)^2,   n >= 0, m >= 1,
//
// and the exact constants of its kernel-transform reduction.  A solution
// ansatz K[u](x,y) = Int_0^inf exp(i rho^theta y) rho^r u(rho^gamma x, rho)
// d rho turns the operator into a transport hierarchy in (t, rho) with
// t = rho^gamma x; everything downstream keys off the exponents collected
// here.  All rational quantities are exact; the mode constants are carried
// at the process-wide MPFR precision.

#pragma once

#include "gforge/hp.hpp"
#include "gforge/rational.hpp"

namespace gforge {

struct Params {
  int n = 0;
  int m = 1;

  BigRational theta;   // phase exponent 2m/(2m-1); equals the sharp index s0
  BigRational s0;      // alias of theta, kept under the name used in reports
  BigRational gamma;   // x-rescaling exponent m/((n+1)(2m-1))
  BigRational alpha;   // Laguerre parameter -1/(2n+2) of the even family
  BigRational r;       // seed rho-exponent, fixed by the first cancellation
  BigRational rprime;  // r + 2*gamma, the exponent after applying the operator
  BigRational kappa;   // (-1)^m theta^(-2m), weight of the t^(2n) block
  BigRational q1;      // r + 2*theta - 2*n*gamma (order-2m family offset)
  BigRational q2;      // r + theta - 2*n*gamma (order-(2m-1) family offset)
  BigRational p10;     // transport row i=1: constant coefficient
  BigRational p11;     // transport row i=1: coefficient of t d/dt

  HPFloat c_seed;  // theta * (2n+1)^(1/(2m)), modulus of the seed mode
  ComplexHP c1;    // seed decay: level zero is exp(-c1 rho) v_0(t)
  HPFloat c0;      // Re c1 = c_seed sin(pi/(2m)), the slowest decay rate
  double r1_min = 2.0;  // smallest admissible cutoff radius R
};

// Seed exponent r from the requirement that the first transport row
// annihilates the ground mode: p10(r) + p11 * delta = 0 with delta the
// diagonal first-order transition coefficient -(2n+1)/2.  Closed form:
// r = -(2mn + 3m - n - 1) / (2 (n+1) (2m-1)).
BigRational solve_r(int n, int m);

// Eigenvalue of -u'' + t^(2(2n+1)) u = E t^(2n) u on the even (k-th) or odd
// family.
BigRational eigenvalue(int n, int k, bool odd = false);

Params derive_params(int n, int m);

}  // namespace gforge
