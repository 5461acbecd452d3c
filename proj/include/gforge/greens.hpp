// SPDX-License-Identifier: Apache-2.0
//
// Fundamental solutions of the constant-coefficient operators
//   Theta = d^(2m)/d rho^(2m) + (-1)^m (2m/(2m-1))^(2m) E
// attached to each eigenvalue E of the spectral ladder, together with the
// convolution and correction machinery built on them.  The solution is
// defined through its Fourier representation and normalized so that
// Theta G = delta holds distributionally; that property is verified against
// smooth test functions before a GreensFn is released to callers.

#pragma once

#include <complex>
#include <functional>
#include <vector>

#include "gforge/exppoly.hpp"
#include "gforge/hp.hpp"
#include "gforge/quadrature.hpp"
#include "gforge/rational.hpp"

namespace gforge {

// ---- smooth test bump --------------------------------------------------------

// B(s) = exp(1 - 1/(1 - s^2)) on (-1, 1), zero outside; B(0) = 1.  The k-th
// derivative is P_k(s) (1-s^2)^(-2k) B(s) with exactly computed integer
// polynomials P_k.
const Poly& bump_poly(int k);
double bump_eval(int k, double s);

// ---- operator and fundamental solution ---------------------------------------

struct OdeOperator {
  int m = 1;
  BigRational E;
  HPFloat c;              // (2m/(2m-1)) E^(1/2m)
  ComplexHP const_term;   // (-1)^m (2m/(2m-1))^(2m) E, purely real
  double c_d = 0.0;
  double const_d = 0.0;
};

OdeOperator ode_operator(int m, const BigRational& E);

class GreensFn {
 public:
  const OdeOperator& op() const { return op_; }
  int m() const { return op_.m; }

  // G(rho) = sum_j a_j exp(mu_j |rho|) over the m upper-half-plane modes,
  // mu_j = i c lambda_j.
  const std::vector<std::complex<double>>& amplitudes() const { return a_; }
  const std::vector<std::complex<double>>& exponents() const { return mu_; }
  const std::vector<ComplexHP>& amplitudes_hp() const { return a_hp_; }
  const std::vector<ComplexHP>& roots_hp() const { return lam_hp_; }

  std::complex<double> eval(double rho) const;
  // ell-th derivative, ell <= 2m-1; side selects the one-sided limit at
  // rho = 0 (ignored elsewhere).
  std::complex<double> deriv(int ell, double rho, int side = +1) const;

  double decay_rate() const { return rate_; }            // c sin(pi/(2m))
  double bound_constant() const { return bound_k_; }     // envelope constant
  bool bound_flagged() const { return bound_k_ > 1.0; }
  double weak_delta_residual() const { return weak_resid_; }
  // Measured ratio between this solution and the trigonometric closed form
  // found in the classical references; recorded, not assumed.
  std::complex<double> printed_form_ratio() const { return printed_ratio_; }

 private:
  friend GreensFn greens(const OdeOperator& op);
  GreensFn() = default;

  OdeOperator op_;
  std::vector<ComplexHP> lam_hp_, a_hp_;
  std::vector<std::complex<double>> a_, mu_;
  std::vector<std::vector<std::complex<double>>> mu_pow_;  // [j][ell], ell <= 2m-1
  double rate_ = 0.0;
  double bound_k_ = 0.0;
  double weak_resid_ = 0.0;
  std::complex<double> printed_ratio_{0.0, 0.0};
};

// Builds the fundamental solution from the residue form and validates it
// (root property, derivative jump, weak-delta residual) before returning.
// Throws if any validation fails.
GreensFn greens(const OdeOperator& op);

std::complex<double> greens_deriv(const GreensFn& g, int ell, double rho, int side = +1);
ComplexHP greens_deriv_hp(const GreensFn& g, int ell, const HPFloat& rho, int side = +1);

// ---- weak-delta validation -----------------------------------------------------

struct BumpSpec {
  double center = 0.0;
  double width = 1.0;
};

// max over the test bumps of | int G (Theta phi) - phi(0) |.  Throws when the
// quadrature fails to converge.
double weak_delta_check(const GreensFn& g, const std::vector<BumpSpec>& tests,
                        double quad_tol = 1e-10);

// ---- convolution against a decaying right-hand side -----------------------------

struct ConvSpec {
  double rho_min = 0.0;     // support onset of the right-hand side
  double tail_start = 0.0;  // beyond this point rhs is modeled as a pure exponential
  double tail_decay = 0.0;  // exponential rate of that model; 0 disables the tail
};

// (G^(ell) * rhs)(rho) with the kink at sigma = rho as a mandatory breakpoint
// and an analytically integrated exponential tail.
std::complex<double> convolve(const GreensFn& g, int ell, const CxFn& rhs, double rho,
                              const ConvSpec& spec, double tol = 1e-10);

// ---- marginal-mode corrections ---------------------------------------------------

// Tail model rhs(s) ~ amp e^{i z s} s^{-e} for s >= T, used to close the
// oscillatory integrals the corrections need.
struct TailModel {
  std::complex<double> amp{0.0, 0.0};
  std::complex<double> z{0.0, 0.0};
  double e = 0.0;
  double T = 0.0;
};

// Homogeneous solutions h_q(rho) = a_q e^{mu_q rho} int_{rho_min}^inf
// e^{-mu_q tau} rhs(tau) d tau for the marginal modes (q = 0 and q = m-1;
// a single correction when m = 1).  Subtracting them from G * rhs gains one
// power of rho of decay on the slowest modes.
std::vector<CxFn> marginal_corrections(const GreensFn& g0, const CxFn& rhs, double rho_min,
                                       const TailModel& tail, double tol = 1e-10);

}  // namespace gforge
