// SPDX-License-Identifier: Apache-2.0

#include "gforge/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gforge {

BigRational solve_r(int n, int m) {
  if (n < 0 || m < 1) throw std::invalid_argument("solve_r: need n >= 0, m >= 1");
  long nn = n, mm = m;
  return BigRational(-(2 * mm * nn + 3 * mm - nn - 1), 2 * (nn + 1) * (2 * mm - 1));
}

BigRational eigenvalue(int n, int k, bool odd) {
  if (n < 0 || k < 0) throw std::invalid_argument("eigenvalue: need n, k >= 0");
  long e = 4L * k * (n + 1) + 2L * n + 1;
  return BigRational(odd ? e + 2 : e);
}

Params derive_params(int n, int m) {
  if (n < 0 || m < 1) throw std::invalid_argument("derive_params: need n >= 0, m >= 1");
  Params p;
  p.n = n;
  p.m = m;

  long nn = n, mm = m;
  p.theta = BigRational(2 * mm, 2 * mm - 1);
  p.s0 = p.theta;
  p.gamma = BigRational(mm, (nn + 1) * (2 * mm - 1));
  p.alpha = BigRational(-1, 2 * nn + 2);
  p.r = solve_r(n, m);
  p.rprime = p.r + BigRational(2) * p.gamma;
  // ((2m-1)/(2im))^(2m) with i the imaginary unit: i^(-2m) = (-1)^m, the rest
  // is theta^(-2m).
  p.kappa = p.theta.pow(-2 * mm) * BigRational(m % 2 == 0 ? 1 : -1);
  p.q1 = p.r + BigRational(2) * p.theta - BigRational(2 * nn) * p.gamma;
  p.q2 = p.r + p.theta - BigRational(2 * nn) * p.gamma;
  // First transport row evaluated at the solved r.  The constant term
  // m(4m-1)/(2m-1) + 2m r pairs with the T-coefficient 2m gamma against the
  // diagonal transition -(2n+1)/2; solve_r makes the pair cancel.
  p.p10 = BigRational(mm * (4 * mm - 1), 2 * mm - 1) + BigRational(2 * mm) * p.r;
  p.p11 = BigRational(2 * mm) * p.gamma;

  // Mode constants.  The ground transport operator is
  // d^(2m)/d rho^(2m) + (-1)^m theta^(2m) (2n+1); its decaying root with the
  // slowest decay is c1 = c_seed * exp(-i pi (m-1) / (2m)).
  p.c_seed = HPFloat(p.theta) * HPFloat(BigRational(2 * nn + 1)).root(2 * mm);
  HPFloat pi = HPFloat::pi();
  HPFloat ang = pi * HPFloat(BigRational(-(mm - 1), 2 * mm));
  p.c1 = ComplexHP::from_polar(p.c_seed, ang);
  p.c0 = p.c1.re;

  // Cutoff-radius floor: the level-j estimates need R at least proportional
  // to the reciprocal spectral gap between the first two decay rates.
  double c_lo = p.theta.to_double() * std::pow(eigenvalue(n, 0).to_double(), 1.0 / (2 * m));
  double c_hi = p.theta.to_double() * std::pow(eigenvalue(n, 1).to_double(), 1.0 / (2 * m));
  double gap = (c_hi - c_lo) * std::sin(3.14159265358979323846 / (2 * m));
  p.r1_min = std::max(2.0, 2.0 / gap);
  return p;
}

}  // namespace gforge
