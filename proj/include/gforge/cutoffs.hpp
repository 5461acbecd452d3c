// SPDX-License-Identifier: Apache-2.0
//
// The two cutoff families of the level construction.
//
// chi_ell gates the right-hand side of level ell: it vanishes below
// 2 R1 (ell+1), equals one above 4 R1 (ell+1), and has derivative bounds
// uniform in ell because the transition width grows linearly with the level.
// omega_ell gates the assembled level sum.  Its transition sits on
// [2 R (ell+1), 4 R (ell+1)] and its profile is a mollified step obtained by
// convolving bumps of summable widths, which keeps every derivative under a
// Gevrey-type factorial bound of index sigma = 1 + 1/(2m).

#pragma once

#include <vector>

namespace gforge {

// ---- inner cutoff -------------------------------------------------------------

// Smooth step assembled from the integral of the standard bump, rescaled to
// the transition band.  Derivatives of every order are closed-form bump
// derivatives, so eval(k, rho) is exact up to rounding.
class ChiCutoff {
 public:
  ChiCutoff(int ell, double r1);

  int ell() const { return ell_; }
  double r1() const { return r1_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double width() const { return hi_ - lo_; }

  // k-th derivative at rho (k = 0 is the cutoff itself).
  double eval(int k, double rho) const;
  double operator()(double rho) const { return eval(0, rho); }

  // max over 1 <= k <= k_max of sup |chi_ell^(k)| across all levels ell >= 1;
  // the narrowest band (ell = 1) dominates, so the bound is level-free.
  static double derivative_bound(double r1, int k_max);

  // Unit profile s: [0,1] -> [0,1] shared by every level; k-th derivative.
  static double profile(int k, double x);

 private:
  int ell_ = 0;
  double r1_ = 0.0, lo_ = 0.0, hi_ = 0.0;
};

// ---- outer cutoff -------------------------------------------------------------

struct OmegaBounds {
  // Fitted constant of |d^a omega| <= c_flat^(a+1) R^(-a), a <= a_flat.
  double c_flat = 0.0;
  int a_flat = 0;
  // Fitted constant of |d^a omega(rho)| <= (R c_gevrey)^(a+1) a!^sigma rho^(-a).
  double c_gevrey = 0.0;
  int a_gevrey = 0;
};

class OmegaCutoff {
 public:
  // sigma = 1 + 1/(2m); gamma_store < 0 picks the default derivative depth.
  OmegaCutoff(int ell, double R, int m, int gamma_store = -1);

  int ell() const { return ell_; }
  double R() const { return R_; }
  double sigma() const { return sigma_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  // gamma-th derivative at rho; gamma = 0 is the cutoff (exactly 0 below the
  // support onset and exactly 1 past the transition).  gamma <= eval_max().
  double eval(int gamma, double rho) const;
  double operator()(double rho) const { return eval(0, rho); }
  int eval_max() const { return gamma_store_ - 2; }

  const OmegaBounds& bounds() const { return bounds_; }
  const std::vector<double>& widths() const { return widths_; }

 private:
  void construct();
  void measure_bounds();

  int ell_ = 0;
  double R_ = 0.0, sigma_ = 0.0;
  double lo_ = 0.0, hi_ = 0.0;
  int gamma_store_ = 0;
  std::vector<double> widths_;

  // Stored window [x0_, x0_ + dx_ * (count-1)] covering the transition.
  double x0_ = 0.0, dx_ = 0.0;
  double support_lo_ = 0.0, support_hi_ = 0.0;  // exact mollifier support
  std::vector<std::vector<double>> vals_;       // [gamma][node]
  OmegaBounds bounds_;
};

}  // namespace gforge
