// SPDX-License-Identifier: Apache-2.0

#include "gforge/cutoffs.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "gforge/greens.hpp"
#include "gforge/interp.hpp"

namespace gforge {

namespace {

// ---- shared unit step profile --------------------------------------------------

// s(x) = int_0^x B(2u-1) du / int_0^1 B(2u-1) du with the standard bump B.
// The cumulative is tabulated once on a fine grid; everything else is exact.
struct UnitProfile {
  static constexpr int kCells = 4096;
  double cum[kCells + 1];
  double total;

  UnitProfile() {
    // 5-point Gauss-Legendre per cell; the integrand is entire on each cell.
    static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                 0.5384693101056831, 0.9061798459386640};
    static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                 0.4786286704993665, 0.2369268850561891};
    cum[0] = 0.0;
    const double h = 1.0 / kCells;
    for (int i = 0; i < kCells; ++i) {
      const double a = i * h;
      double acc = 0.0;
      for (int g = 0; g < 5; ++g) {
        const double x = a + 0.5 * h * (1.0 + gx[g]);
        acc += gw[g] * bump_eval(0, 2.0 * x - 1.0);
      }
      cum[i + 1] = cum[i] + acc * 0.5 * h;
    }
    total = cum[kCells];
  }

  double value(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double u = x * kCells;
    int i = static_cast<int>(u);
    if (i >= kCells) i = kCells - 1;
    const double h = 1.0 / kCells;
    const double a = i * h, b = a + h;
    // Cubic Hermite on the cell: cumulative values at the ends, exact slopes.
    const double f0 = cum[i], f1 = cum[i + 1];
    const double d0 = bump_eval(0, 2.0 * a - 1.0), d1 = bump_eval(0, 2.0 * b - 1.0);
    const double t = (x - a) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double val = (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * h * d0 +
                       (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * h * d1;
    return val / total;
  }

  double deriv(int k, double x) const {
    // s^(k)(x) = 2^(k-1) B^(k-1)(2x-1) / total for k >= 1.
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::ldexp(bump_eval(k - 1, 2.0 * x - 1.0), k - 1) / total;
  }
};

const UnitProfile& unit_profile() {
  static const UnitProfile p;
  return p;
}

// ---- FFT helpers ----------------------------------------------------------------

void dft_inplace(std::vector<std::complex<double>>& v, int sign) {
  fftw_plan plan =
      fftw_plan_dft_1d(static_cast<int>(v.size()), reinterpret_cast<fftw_complex*>(v.data()),
                       reinterpret_cast<fftw_complex*>(v.data()), sign, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

// zeta(sigma) by direct sum plus an Euler-Maclaurin tail.
double zeta_of(double sigma) {
  const int K = 200;
  double s = 0.0;
  for (int k = 1; k <= K; ++k) s += std::pow(k, -sigma);
  const double Kd = K;
  s += std::pow(Kd, 1.0 - sigma) / (sigma - 1.0) - 0.5 * std::pow(Kd, -sigma) +
       sigma * std::pow(Kd, -sigma - 1.0) / 12.0;
  return s;
}

// Samples a centered bump of the given width as a discrete unit-mass vector
// on the periodic grid (wrap-around indices for the negative half).
std::vector<std::complex<double>> bump_prob(double width, int N, double dx) {
  std::vector<std::complex<double>> v(N, std::complex<double>(0.0, 0.0));
  double mass = 0.0;
  const double half = width / 2.0;
  for (int i = 0; i < N; ++i) {
    const double x = (i <= N / 2) ? i * dx : (i - N) * dx;
    if (std::abs(x) < half) {
      const double b = bump_eval(0, x / half);
      v[i] = b;
      mass += b;
    }
  }
  if (mass <= 0.0) throw std::runtime_error("omega cutoff: mollifier width below grid scale");
  for (auto& z : v) z /= mass;
  return v;
}

constexpr int kFftSize = 32768;

}  // namespace

// ---- ChiCutoff -----------------------------------------------------------------

ChiCutoff::ChiCutoff(int ell, double r1) : ell_(ell), r1_(r1) {
  if (ell < 0 || !(r1 > 0.0)) throw std::invalid_argument("ChiCutoff: bad arguments");
  lo_ = 2.0 * r1 * (ell + 1);
  hi_ = 4.0 * r1 * (ell + 1);
}

double ChiCutoff::profile(int k, double x) {
  const UnitProfile& p = unit_profile();
  return (k == 0) ? p.value(x) : p.deriv(k, x);
}

double ChiCutoff::eval(int k, double rho) const {
  const double w = hi_ - lo_;
  const double x = (rho - lo_) / w;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return k == 0 ? 1.0 : 0.0;
  return profile(k, x) * std::pow(w, -k);
}

double ChiCutoff::derivative_bound(double r1, int k_max) {
  // Widths are 2 r1 (ell+1) >= 4 r1 for ell >= 1; scan the unit profile once.
  const int samples = 2000;
  double best = 1.0;  // k = 0 contributes sup = 1
  for (int k = 1; k <= k_max; ++k) {
    double sup = 0.0;
    for (int i = 1; i < samples; ++i) {
      const double x = static_cast<double>(i) / samples;
      sup = std::max(sup, std::abs(profile(k, x)));
    }
    best = std::max(best, sup * std::pow(4.0 * r1, -k));
  }
  return best;
}

// ---- OmegaCutoff ----------------------------------------------------------------

OmegaCutoff::OmegaCutoff(int ell, double R, int m, int gamma_store)
    : ell_(ell), R_(R), sigma_(1.0 + 1.0 / (2.0 * m)) {
  if (ell < 0 || !(R > 0.0) || m < 1) throw std::invalid_argument("OmegaCutoff: bad arguments");
  lo_ = 2.0 * R * (ell + 1);
  hi_ = 4.0 * R * (ell + 1);
  gamma_store_ = (gamma_store > 0) ? gamma_store : std::max(2 * m + 3, 12);

  // Mollifier widths: a block of equal widths R/4 (three per level, at least
  // one) followed by a summable tail that carries the Gevrey regularity.
  const int n_base = std::max(1, 3 * ell);
  const int n_tail = 14;
  const double zeta = zeta_of(sigma_);
  widths_.clear();
  for (int k = 0; k < n_base; ++k) widths_.push_back(R / 4.0);
  for (int k = 1; k <= n_tail; ++k)
    widths_.push_back((R * (ell + 1) / 4.0) * std::pow(k, -sigma_) / zeta);
  double W = 0.0;
  for (double w : widths_) W += w;
  if (!(W < 2.0 * R * (ell + 1)))
    throw std::logic_error("OmegaCutoff: mollifier exceeds the transition band");

  construct();
  measure_bounds();
}

void OmegaCutoff::construct() {
  const int N = kFftSize;
  const double P = 6.0 * R_ * (ell_ + 1);
  const double dx = P / N;
  dx_ = dx;

  // Spectral product of all mollifier factors, and of all but the first.
  std::vector<std::complex<double>> first = bump_prob(widths_[0], N, dx);
  dft_inplace(first, FFTW_FORWARD);
  std::vector<std::complex<double>> rest(N, std::complex<double>(1.0, 0.0));
  for (size_t b = 1; b < widths_.size(); ++b) {
    std::vector<std::complex<double>> f = bump_prob(widths_[b], N, dx);
    dft_inplace(f, FFTW_FORWARD);
    for (int i = 0; i < N; ++i) rest[i] *= f[i];
  }

  double W = 0.0;
  for (double w : widths_) W += w;
  const double center = 3.0 * R_ * (ell_ + 1);
  const int ic = static_cast<int>(std::lround(center / dx));
  support_lo_ = ic * dx - W / 2.0 - 2.0 * dx;
  support_hi_ = ic * dx + W / 2.0 + 2.0 * dx;

  // Stored window: the mollifier support plus a small margin.
  const int i0 = std::max(0, static_cast<int>(std::floor(support_lo_ / dx)) - 2);
  const int i1 = std::min(N - 1, static_cast<int>(std::ceil(support_hi_ / dx)) + 2);
  x0_ = i0 * dx;
  const int count = i1 - i0 + 1;
  vals_.assign(gamma_store_ + 1, std::vector<double>(count, 0.0));

  // The density B and the step omega (gamma = 0).
  {
    std::vector<std::complex<double>> spec(N);
    for (int i = 0; i < N; ++i) spec[i] = first[i] * rest[i];
    dft_inplace(spec, FFTW_BACKWARD);
    // Discrete probability vector of the full convolution, recentred.
    std::vector<double> prob(N, 0.0);
    for (int i = 0; i < N; ++i) {
      const int shifted = (i - ic) % N;
      const int src = shifted < 0 ? shifted + N : shifted;
      const double x = i * dx;
      if (x > support_lo_ && x < support_hi_) prob[i] = spec[src].real() / N;
    }
    // Trapezoid cumulative, so finite differences of omega reproduce the
    // stored density to second order.
    std::vector<double> cum(N, 0.0);
    for (int i = 1; i < N; ++i) cum[i] = cum[i - 1] + 0.5 * (prob[i - 1] + prob[i]);
    const double mass = cum[N - 1];
    std::vector<double>& w0 = vals_[0];
    for (int i = i0; i <= i1; ++i) w0[i - i0] = std::min(1.0, std::max(0.0, cum[i] / mass));
    // Force the exact plateaus outside the mollifier support.
    for (int i = i0; i <= i1; ++i) {
      const double x = i * dx;
      if (x <= support_lo_) w0[i - i0] = 0.0;
      if (x >= support_hi_) w0[i - i0] = 1.0;
    }
  }

  // d^gamma omega = B^(gamma-1), with the derivative taken analytically on
  // the first factor so the spectral noise floor never gets amplified.
  const double wfirst = widths_[0] / 2.0;
  // Mass normalizer of the sampled first bump.
  double z1 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double x = (i <= N / 2) ? i * dx : (i - N) * dx;
    if (std::abs(x) < wfirst) z1 += bump_eval(0, x / wfirst);
  }
  for (int gamma = 1; gamma <= gamma_store_; ++gamma) {
    std::vector<std::complex<double>> der(N, std::complex<double>(0.0, 0.0));
    const double scale = std::pow(1.0 / wfirst, gamma - 1) / z1;
    for (int i = 0; i < N; ++i) {
      const double x = (i <= N / 2) ? i * dx : (i - N) * dx;
      if (std::abs(x) < wfirst) der[i] = bump_eval(gamma - 1, x / wfirst) * scale;
    }
    dft_inplace(der, FFTW_FORWARD);
    for (int i = 0; i < N; ++i) der[i] *= rest[i];
    dft_inplace(der, FFTW_BACKWARD);
    std::vector<double>& wg = vals_[gamma];
    for (int i = i0; i <= i1; ++i) {
      const double x = i * dx;
      if (x <= support_lo_ || x >= support_hi_) continue;  // exact zero outside
      const int shifted = (i - ic) % N;
      const int src = shifted < 0 ? shifted + N : shifted;
      wg[i - i0] = der[src].real() / (N * dx);
    }
  }
}

double OmegaCutoff::eval(int gamma, double rho) const {
  if (gamma < 0 || gamma > eval_max()) throw std::invalid_argument("OmegaCutoff: bad order");
  if (rho <= support_lo_) return 0.0;
  if (rho >= support_hi_) return gamma == 0 ? 1.0 : 0.0;
  const int count = static_cast<int>(vals_[0].size());
  int i = static_cast<int>(std::floor((rho - x0_) / dx_));
  i = std::clamp(i, 0, count - 2);
  const double xa = x0_ + i * dx_, xb = xa + dx_;
  // Quintic Hermite from the three stored consecutive derivative arrays.
  double f0[3] = {vals_[gamma][i], vals_[gamma + 1][i], vals_[gamma + 2][i]};
  double f1[3] = {vals_[gamma][i + 1], vals_[gamma + 1][i + 1], vals_[gamma + 2][i + 1]};
  HermitePair<double> hp;
  hp.build(xa, xb, f0, f1, 2);
  double out[1];
  hp.eval(rho, 0, out);
  return out[0];
}

void OmegaCutoff::measure_bounds() {
  const int count = static_cast<int>(vals_[0].size());
  bounds_.a_flat = std::min(std::max(1, 3 * ell_), std::min(8, gamma_store_));
  bounds_.a_gevrey = gamma_store_;
  double c_flat = 0.0, c_gev = 0.0;
  for (int a = 1; a <= gamma_store_; ++a) {
    double sup = 0.0, sup_w = 0.0;
    for (int i = 0; i < count; ++i) {
      const double v = std::abs(vals_[a][i]);
      sup = std::max(sup, v);
      const double rho = x0_ + i * dx_;
      sup_w = std::max(sup_w, v * std::pow(rho, a));
    }
    if (a <= bounds_.a_flat)
      c_flat = std::max(c_flat, std::pow(sup * std::pow(R_, a), 1.0 / (a + 1)));
    const double fact = std::exp(sigma_ * std::lgamma(a + 1.0));
    c_gev = std::max(c_gev, std::pow(sup_w / fact, 1.0 / (a + 1)) / R_);
  }
  bounds_.c_flat = c_flat;
  bounds_.c_gevrey = c_gev;
}

}  // namespace gforge
