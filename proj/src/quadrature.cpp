// SPDX-License-Identifier: Apache-2.0

#include "gforge/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace gforge {

namespace {

// Gauss-Kronrod 7/15 pair on [-1, 1] (nonnegative abscissae; the rule is
// symmetric).  Even indices are Kronrod-only nodes, odd indices carry the
// embedded 7-point Gauss rule.
constexpr double kXgk[8] = {
    0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
    0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
    0.2077849550078985, 0.0};
constexpr double kWgk[8] = {
    0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
    0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
    0.2044329400752989, 0.2094821410847278};
constexpr double kWg[4] = {0.1294849661688697, 0.2797053914892767,
                           0.3818300505051189, 0.4179591836734694};

struct Panel {
  double a, b;
  std::complex<double> value;
  double err;
  bool operator<(const Panel& o) const { return err < o.err; }
};

Panel eval_panel(const CxFn& f, double a, double b) {
  const double h = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  std::complex<double> fv[15];
  fv[14] = f(mid);
  std::complex<double> kr = kWgk[7] * fv[14];
  std::complex<double> gs = kWg[3] * fv[14];
  double resabs = kWgk[7] * std::abs(fv[14]);
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kXgk[i];
    fv[2 * i] = f(mid - dx);
    fv[2 * i + 1] = f(mid + dx);
    kr += kWgk[i] * (fv[2 * i] + fv[2 * i + 1]);
    if (i % 2 == 1) gs += kWg[i / 2] * (fv[2 * i] + fv[2 * i + 1]);
    resabs += kWgk[i] * (std::abs(fv[2 * i]) + std::abs(fv[2 * i + 1]));
  }
  // L1 deviation from the panel mean, used to normalize the raw Kronrod
  // versus Gauss difference the way QUADPACK does.  Without the
  // normalization the 1.5-power rescaling is not scale invariant and
  // integrands far below unit size get their error estimates crushed.
  const std::complex<double> mean = 0.5 * kr;
  double resasc = kWgk[7] * std::abs(fv[14] - mean);
  for (int i = 0; i < 7; ++i)
    resasc +=
        kWgk[i] * (std::abs(fv[2 * i] - mean) + std::abs(fv[2 * i + 1] - mean));
  kr *= h;
  gs *= h;
  resabs *= std::abs(h);
  resasc *= std::abs(h);
  double err = std::abs(kr - gs);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double eps50 = 50.0 * std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / eps50)
    err = std::max(eps50 * resabs, err);
  return Panel{a, b, kr, err};
}

}  // namespace

QuadResult integrate(const CxFn& f, double a, double b, double abs_tol, double rel_tol,
                     int max_panels) {
  return integrate_breakpoints(f, a, b, {}, abs_tol, rel_tol, max_panels);
}

QuadResult integrate_breakpoints(const CxFn& f, double a, double b,
                                 std::vector<double> interior, double abs_tol,
                                 double rel_tol, int max_panels) {
  QuadResult res;
  if (!(a < b)) {
    res.converged = true;
    return res;
  }
  std::vector<double> pts{a};
  std::sort(interior.begin(), interior.end());
  for (double p : interior)
    if (p > a && p < b && p > pts.back()) pts.push_back(p);
  pts.push_back(b);

  std::priority_queue<Panel> heap;
  std::complex<double> total = 0.0;
  double err_total = 0.0;
  double l1_total = 0.0;  // scale reference robust against cancellation
  int count = 0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    Panel p = eval_panel(f, pts[i], pts[i + 1]);
    total += p.value;
    err_total += p.err;
    l1_total += std::abs(p.value);
    heap.push(p);
    ++count;
  }

  auto threshold = [&]() {
    return std::max(abs_tol, rel_tol * std::max(std::abs(total), l1_total));
  };

  while (err_total > threshold() && count < max_panels) {
    Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      // Interval at floating-point resolution; nothing more to refine here.
      heap.push(Panel{worst.a, worst.b, worst.value, 0.0});
      continue;
    }
    Panel left = eval_panel(f, worst.a, mid);
    Panel right = eval_panel(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err_total += left.err + right.err - worst.err;
    l1_total += std::abs(left.value) + std::abs(right.value) - std::abs(worst.value);
    heap.push(left);
    heap.push(right);
    ++count;
  }

  res.value = total;
  res.error_est = err_total;
  res.panels = count;
  res.converged = err_total <= threshold();
  return res;
}

std::complex<double> tail_osc_anchored(std::complex<double> delta, double T, double e,
                                       double tol) {
  if (!(T > 0)) throw std::invalid_argument("tail_osc: T must be positive");
  if (std::imag(delta) < -1e-15) throw std::invalid_argument("tail_osc: divergent tail");
  const double mag = std::abs(delta);
  if (mag == 0.0) {
    if (!(e > 1.0)) throw std::invalid_argument("tail_osc: e must exceed 1 when Delta = 0");
    return std::pow(T, 1.0 - e) / (e - 1.0);
  }

  // Rotate the path: s = T + e^{i phi} u.  The exponent becomes
  // i Delta T + i Delta e^{i phi} u, decaying at rate |Delta| sin(psi + phi)
  // with psi = arg Delta.  Clamp phi inside (-pi/2, pi/2) so the algebraic
  // factor never leaves the right half-plane.
  const double psi = std::arg(delta);  // in [0, pi] since Im >= 0
  const double half_pi = 1.5707963267948966;
  double phi = half_pi - psi;
  const double lim = half_pi - 0.05;
  phi = std::clamp(phi, -lim, lim);
  const double rate = mag * std::sin(psi + phi);

  const std::complex<double> rot(std::cos(phi), std::sin(phi));
  const std::complex<double> i_delta_rot = std::complex<double>(0.0, 1.0) * delta * rot;
  const double span = (50.0 + 10.0 * e) / rate;

  auto integrand = [&](double u) -> std::complex<double> {
    std::complex<double> s = std::complex<double>(T, 0.0) + rot * u;
    return std::exp(i_delta_rot * u) * std::pow(s, -e);
  };
  QuadResult q = integrate(integrand, 0.0, span, tol * std::pow(T, -e), tol, 6000);
  return rot * q.value;
}

std::complex<double> tail_osc(std::complex<double> delta, double T, double e, double tol) {
  // e^{i Delta T} has modulus <= 1 when Im(Delta) >= 0, so no overflow here.
  return std::exp(std::complex<double>(0.0, 1.0) * delta * T) *
         tail_osc_anchored(delta, T, e, tol);
}

}  // namespace gforge
