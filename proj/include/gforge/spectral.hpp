// SPDX-License-Identifier: Apache-2.0
//
// Eigenfunctions of the model operator -u'' + t^(2(2n+1)) u = E t^(2n) u.
// Both parity families are weighted Laguerre polynomials in s =
// t^(2n+2)/(n+1); everything is carried unnormalized and exactly, with
// normalization data recorded as a rational multiple of a Gamma factor.

#pragma once

#include <string>
#include <vector>

#include "gforge/exppoly.hpp"
#include "gforge/params.hpp"

namespace gforge {

// Laguerre polynomial L_k^(alpha) as an exact polynomial in s, via the
// standard three-term recurrence.
Poly laguerre(unsigned k, const BigRational& alpha);
// Same polynomial from the explicit alternating binomial sum; used as an
// independent oracle for the recurrence (and for the sign of alpha in it).
Poly laguerre_binomial(unsigned k, const BigRational& alpha);

// A value of the form  coef0 * (n+1)^alpha Gamma(1+alpha)
//                    + coef1 * (n+1)^abar Gamma(1+abar),
// with alpha = -1/(2n+2) and abar = +1/(2n+2); the two Gamma classes that
// half-line moments of eigenfunction products generate.  Exact zero tests
// reduce to rational zero tests on the two coefficients.
struct SymValue {
  int n = 0;
  BigRational coef_even;  // multiplies (n+1)^alpha Gamma(1+alpha)
  BigRational coef_odd;   // multiplies (n+1)^abar Gamma(1+abar)

  bool is_zero() const { return coef_even.is_zero() && coef_odd.is_zero(); }
  double to_double() const;
  // At n = 0 the two classes coincide up to Gamma(3/2) = (1/2) Gamma(1/2);
  // fold everything onto the even class so equality is representation-free.
  void canonicalize();
};

struct EigenFn {
  int n = 0;
  int k = 0;
  bool odd = false;
  BigRational E;
  ExpPoly fn;       // unnormalized representation
  SymValue norm2;   // (f, f), from the closed-form Laguerre norm
};

EigenFn eigenfunction(bool odd, int k, int n);

// (-d^2/dt^2 + t^(2(2n+1))) f - E t^(2n) f, computed exactly in the ring.
// The contract is the zero element; anything else is a construction bug.
ExpPoly eigen_residual(const EigenFn& f);

// (f, g) = 1/2 Int_R t^(2n) f g dt, reduced exactly through s-substitution.
// Cross-parity products vanish by symmetry (odd integrand).
SymValue inner_product(const EigenFn& f, const EigenFn& g);

// ---- bound certification --------------------------------------------------

struct BoundRow {
  int k = 0;
  double sup_norm = 0;    // sup |v_k| / sqrt((v_k, v_k))
  double sup_ratio = 0;   // sup_norm / E_k^(3/2 + 1/(4n+4))
  double dsup_norm = 0;   // sup |v_k'| normalized the same way
  double dsup_ratio = 0;  // dsup_norm / E_k^(7/2 - 1/(4n+4))
  double decay_B = 0;     // fitted B in log|v_k(t)| <= C - B t^(2n+2)
};

struct GSFit {
  double mu_a = 0;   // exponent on a log a (moment direction)
  double nu_b = 0;   // exponent on b log b (derivative direction)
  double beta_a = 0;
  double beta_b = 0;
  double r2 = 0;
};

struct BoundReport {
  int n = 0;
  int k_max = 0;
  std::vector<BoundRow> rows;
  GSFit gs;          // pooled over k (per-k intercepts)
  double decay_floor = 0;  // (1 - (1/2)^(2n+1)) / (2n+2)
  bool grid_ok = true;     // tail weight fell below tolerance on every grid
  std::string to_csv() const;
};

// Empirical certification of the sup-norm, decay, and Gelfand-Shilov growth
// of the eigenfunction family: exact polynomial evaluations on a rational
// grid (geometrically refined near the turning point E_k^(1/(2n+2))), with
// growth exponents recovered by least squares on log-sup tables.
BoundReport bound_suite(int k_max, int n);

// Least squares helper: solves (X^T X) beta = X^T y for a small dense system
// with partial pivoting; returns the coefficient vector.
std::vector<double> least_squares(const std::vector<std::vector<double>>& X,
                                  const std::vector<double>& y);

}  // namespace gforge
