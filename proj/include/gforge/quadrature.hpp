// SPDX-License-Identifier: Apache-2.0
//
// Adaptive complex-valued quadrature on finite intervals plus semi-infinite
// oscillatory tails.  The finite-interval engine is a globally adaptive
// Gauss-Kronrod 7/15 scheme; tails of the form  int_T^inf e^{i D s} s^{-e} ds
// are evaluated on a rotated ray so the integrand decays exponentially.

#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace gforge {

using CxFn = std::function<std::complex<double>(double)>;

struct QuadResult {
  std::complex<double> value{0.0, 0.0};
  double error_est = 0.0;
  int panels = 0;
  bool converged = false;
};

// Integral of f over [a, b]; the worst panel is bisected until the summed
// error estimate drops below max(abs_tol, rel_tol * |value|) or the panel
// budget runs out.
QuadResult integrate(const CxFn& f, double a, double b, double abs_tol = 1e-12,
                     double rel_tol = 1e-10, int max_panels = 4000);

// Same, with mandatory interior breakpoints (kinks, support edges).  Points
// outside (a, b) are ignored; the list need not be sorted.
QuadResult integrate_breakpoints(const CxFn& f, double a, double b,
                                 std::vector<double> interior, double abs_tol = 1e-12,
                                 double rel_tol = 1e-10, int max_panels = 4000);

// int_T^inf e^{i Delta s} s^{-e} ds for T > 0, e >= 0, Im(Delta) >= 0; the
// case Delta = 0 additionally needs e > 1.  Evaluated exactly for Delta = 0
// and by rotating the contour into the decaying half-plane otherwise.
std::complex<double> tail_osc(std::complex<double> delta, double T, double e,
                              double tol = 1e-12);

// Same tail with the phase referenced to the lower limit:
// int_T^inf e^{i Delta (s - T)} s^{-e} ds.  Never overflows, even when
// e^{i Delta T} would (the plain form is this times that prefactor).
std::complex<double> tail_osc_anchored(std::complex<double> delta, double T, double e,
                                       double tol = 1e-12);

}  // namespace gforge
