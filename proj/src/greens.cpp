// SPDX-License-Identifier: Apache-2.0

#include "gforge/greens.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gforge {

// ============================================================================
// smooth test bump
// ============================================================================

const Poly& bump_poly(int k) {
  if (k < 0) throw std::invalid_argument("bump_poly: negative order");
  static std::vector<Poly> cache{Poly(std::vector<BigRational>{BigRational(1)})};
  // P_{k+1} = P_k' (1-s^2)^2 + 4 k s (1-s^2) P_k - 2 s P_k
  static const Poly s(std::vector<BigRational>{BigRational(0), BigRational(1)});
  static const Poly one_minus_s2(
      std::vector<BigRational>{BigRational(1), BigRational(0), BigRational(-1)});
  while (static_cast<int>(cache.size()) <= k) {
    const int kk = static_cast<int>(cache.size()) - 1;
    const Poly& p = cache.back();
    Poly next = p.derivative() * one_minus_s2 * one_minus_s2 +
                s * one_minus_s2 * p * BigRational(4 * kk) - s * p * BigRational(2);
    cache.push_back(next);
  }
  return cache[k];
}

double bump_eval(int k, double s) {
  const double u = 1.0 - s * s;
  if (u <= 0.0) return 0.0;
  // B^(k)(s) = P_k(s) exp(1 - 1/u - 2k log u); assembling the exponent first
  // keeps the evaluation finite right up to the support edge.
  const double expo = 1.0 - 1.0 / u - 2.0 * k * std::log(u);
  if (expo < -700.0) return 0.0;
  return bump_poly(k).eval_double(s) * std::exp(expo);
}

// ============================================================================
// operator and fundamental solution
// ============================================================================

OdeOperator ode_operator(int m, const BigRational& E) {
  if (m < 1) throw std::invalid_argument("ode_operator: m must be >= 1");
  if (E.sign() <= 0) throw std::invalid_argument("ode_operator: E must be positive");
  OdeOperator op;
  op.m = m;
  op.E = E;
  const BigRational theta(2 * m, 2 * m - 1);
  op.c = HPFloat(theta) * HPFloat(E).root(static_cast<unsigned long>(2 * m));
  BigRational ct = theta.pow(2 * m) * E;
  if (m % 2 == 1) ct = -ct;
  op.const_term = ComplexHP(HPFloat(ct), HPFloat(0L));
  op.c_d = op.c.to_double();
  op.const_d = op.const_term.re.to_double();
  return op;
}

namespace {

ComplexHP exp_hp(const ComplexHP& w) {
  const HPFloat r = w.re.exp();
  return ComplexHP(r * w.im.cos(), r * w.im.sin());
}

}  // namespace

GreensFn greens(const OdeOperator& op) {
  GreensFn g;
  g.op_ = op;
  const int m = op.m;
  const int twom = 2 * m;
  const HPFloat pi = HPFloat::pi();
  const ComplexHP iu(HPFloat(0L), HPFloat(1L));
  const HPFloat eps = HPFloat::eps_for(HPFloat::default_precision() - 16);

  // Characteristic root check across the full circle of roots.
  for (int j = 0; j < twom; ++j) {
    const HPFloat theta_j = pi * HPFloat(static_cast<long>(1 + 2 * j)) / HPFloat(2L * m);
    const ComplexHP lam = ComplexHP::from_polar(HPFloat(1L), theta_j);
    const ComplexHP mu = iu * lam * op.c;
    const ComplexHP resid = mu.pow(twom) + op.const_term;
    if (!(resid.abs() < eps * op.const_term.abs()))
      throw std::logic_error("greens: characteristic root fails the operator equation");
  }

  // Residue amplitudes for the m decaying (upper half-plane) modes:
  //   a_j = (-1)^(m+1) i lambda_j / (2m c^(2m-1)).
  const HPFloat denom = HPFloat(2L * m) * op.c.pow_si(twom - 1);
  for (int j = 0; j < m; ++j) {
    const HPFloat theta_j = pi * HPFloat(static_cast<long>(1 + 2 * j)) / HPFloat(2L * m);
    const ComplexHP lam = ComplexHP::from_polar(HPFloat(1L), theta_j);
    ComplexHP a = iu * lam * (HPFloat(1L) / denom);
    if (m % 2 == 0) a = -a;
    g.lam_hp_.push_back(lam);
    g.a_hp_.push_back(a);
  }

  // Jump normalization: the (2m-1)-th derivative must jump by exactly 1 at 0,
  // which is the distributional statement Theta G = delta.  Lower odd-order
  // one-sided sums must vanish so G is C^(2m-2).
  for (int k = 1; k <= twom - 1; k += 2) {
    ComplexHP sum(HPFloat(0L), HPFloat(0L));
    for (int j = 0; j < m; ++j) {
      const ComplexHP mu = iu * g.lam_hp_[j] * op.c;
      sum = sum + g.a_hp_[j] * mu.pow(static_cast<unsigned>(k));
    }
    if (k == twom - 1) {
      const ComplexHP jump = sum + sum - ComplexHP(HPFloat(1L), HPFloat(0L));
      if (!(jump.abs() < eps * HPFloat(100L)))
        throw std::logic_error("greens: derivative jump does not normalize to 1");
    } else if (!(sum.abs() < eps * HPFloat(100L))) {
      throw std::logic_error("greens: spurious jump below the top derivative order");
    }
  }

  // Double-precision caches for the evaluation paths.
  g.mu_pow_.assign(m, {});
  for (int j = 0; j < m; ++j) {
    const ComplexHP mu = iu * g.lam_hp_[j] * op.c;
    g.a_.push_back(g.a_hp_[j].to_complex());
    g.mu_.push_back(mu.to_complex());
    std::complex<double> p(1.0, 0.0);
    for (int k = 0; k <= twom - 1; ++k) {
      g.mu_pow_[j].push_back(p);
      p *= g.mu_.back();
    }
  }
  g.rate_ = op.c_d * std::sin(M_PI / (2.0 * m));

  // Decay envelope |G| <= K c^-(2m-1) e^(-rate |rho|) on a log-spaced grid.
  {
    double K = 0.0;
    const double lo = 0.02 / op.c_d, hi = 35.0 / g.rate_;
    for (int i = 0; i <= 48; ++i) {
      const double rho = lo * std::pow(hi / lo, i / 48.0);
      const double env = std::pow(op.c_d, twom - 1) * std::exp(g.rate_ * rho);
      K = std::max(K, std::abs(g.eval(rho)) * env);
    }
    g.bound_k_ = K;
  }

  // Measured ratio against the trigonometric closed form of the classical
  // references, evaluated where both are order one.  Recorded, not assumed.
  {
    const double rho = 1.0 / op.c_d;
    std::complex<double> printed = 0.0;
    const std::complex<double> ic(0.0, op.c_d);
    for (int j = 0; j < m; ++j) {
      const double theta_j = M_PI * (1 + 2 * j) / (2.0 * m);
      const std::complex<double> lam = std::polar(1.0, theta_j);
      printed += std::exp(ic * lam * rho) /
                 (2.0 * m * std::polar(1.0, (twom - 1) * theta_j));
    }
    printed *= std::complex<double>(0.0, 1.0) * std::pow(ic, -(twom - 1));
    g.printed_ratio_ = g.eval(rho) / printed;
  }

  // Ground truth: the weak-delta residual against smooth bumps.
  g.weak_resid_ = weak_delta_check(
      g, {{0.0, 1.0}, {0.45, 1.0}, {2.5, 1.0}});
  if (!(g.weak_resid_ <= 1e-6))
    throw std::logic_error("greens: weak-delta residual above tolerance");
  return g;
}

std::complex<double> GreensFn::eval(double rho) const {
  const double ar = std::abs(rho);
  std::complex<double> s = 0.0;
  for (size_t j = 0; j < a_.size(); ++j) s += a_[j] * std::exp(mu_[j] * ar);
  return s;
}

std::complex<double> GreensFn::deriv(int ell, double rho, int side) const {
  const int twom = 2 * op_.m;
  if (ell < 0 || ell >= twom)
    throw std::invalid_argument("GreensFn::deriv: order must satisfy 0 <= ell <= 2m-1");
  const bool neg = (rho < 0.0) || (rho == 0.0 && side < 0);
  const double ar = std::abs(rho);
  std::complex<double> s = 0.0;
  for (size_t j = 0; j < a_.size(); ++j) s += a_[j] * mu_pow_[j][ell] * std::exp(mu_[j] * ar);
  if (neg && (ell % 2 == 1)) s = -s;
  return s;
}

std::complex<double> greens_deriv(const GreensFn& g, int ell, double rho, int side) {
  return g.deriv(ell, rho, side);
}

ComplexHP greens_deriv_hp(const GreensFn& g, int ell, const HPFloat& rho, int side) {
  const int twom = 2 * g.op().m;
  if (ell < 0 || ell >= twom)
    throw std::invalid_argument("greens_deriv_hp: order must satisfy 0 <= ell <= 2m-1");
  const ComplexHP iu(HPFloat(0L), HPFloat(1L));
  const bool neg = (rho < HPFloat(0L)) || (!(HPFloat(0L) < rho.abs()) && side < 0);
  const HPFloat ar = rho.abs();
  ComplexHP sum(HPFloat(0L), HPFloat(0L));
  for (size_t j = 0; j < g.amplitudes_hp().size(); ++j) {
    const ComplexHP mu = iu * g.roots_hp()[j] * g.op().c;
    ComplexHP term = g.amplitudes_hp()[j] * mu.pow(static_cast<unsigned>(ell));
    sum = sum + term * exp_hp(mu * ar);
  }
  if (neg && (ell % 2 == 1)) sum = -sum;
  return sum;
}

// ============================================================================
// weak-delta validation
// ============================================================================

double weak_delta_check(const GreensFn& g, const std::vector<BumpSpec>& tests,
                        double quad_tol) {
  const int twom = 2 * g.op().m;
  const double cst = g.op().const_d;
  double worst = 0.0;
  for (const BumpSpec& t : tests) {
    if (!(t.width > 0)) throw std::invalid_argument("weak_delta_check: width must be positive");
    const double lo = t.center - t.width, hi = t.center + t.width;
    const double wk = std::pow(t.width, -twom);
    auto integrand = [&](double rho) -> std::complex<double> {
      const double s = (rho - t.center) / t.width;
      const double theta_phi = wk * bump_eval(twom, s) + cst * bump_eval(0, s);
      return g.eval(rho) * theta_phi;
    };
    QuadResult q = integrate_breakpoints(integrand, lo, hi, {0.0}, quad_tol, quad_tol, 8000);
    if (!q.converged) throw std::runtime_error("weak_delta_check: quadrature did not converge");
    const double phi0 =
        (std::abs(t.center) < t.width) ? bump_eval(0, -t.center / t.width) : 0.0;
    worst = std::max(worst, std::abs(q.value - phi0));
  }
  return worst;
}

// ============================================================================
// convolution
// ============================================================================

std::complex<double> convolve(const GreensFn& g, int ell, const CxFn& rhs, double rho,
                              const ConvSpec& spec, double tol) {
  const double S = std::max({spec.tail_start, spec.rho_min, rho});
  auto integrand = [&](double sigma) -> std::complex<double> {
    return g.deriv(ell, rho - sigma) * rhs(sigma);
  };
  // No absolute floor here: the output can be exponentially small in rho and
  // the L1-referenced relative criterion is the meaningful one.
  QuadResult q = integrate_breakpoints(integrand, spec.rho_min, S, {rho}, 0.0, tol, 8000);
  if (!q.converged) throw std::runtime_error("convolve: quadrature did not converge");
  std::complex<double> total = q.value;

  if (spec.tail_decay > 0.0) {
    // Beyond S the right-hand side is modeled as rhs(S) e^{-d (sigma-S)}; each
    // mode then integrates in closed form.  sigma >= S >= rho keeps the kernel
    // on one side of its kink.
    const std::complex<double> A = rhs(S);
    if (A != 0.0) {
      const double sgn = (ell % 2 == 1) ? -1.0 : 1.0;
      for (size_t j = 0; j < g.amplitudes().size(); ++j) {
        const std::complex<double> mu = g.exponents()[j];
        std::complex<double> modek = g.amplitudes()[j];
        for (int k = 0; k < ell; ++k) modek *= mu;
        total += sgn * modek * A * std::exp(mu * (S - rho)) / (spec.tail_decay - mu);
      }
    }
  }
  return total;
}

// ============================================================================
// marginal-mode corrections
// ============================================================================

std::vector<CxFn> marginal_corrections(const GreensFn& g0, const CxFn& rhs, double rho_min,
                                       const TailModel& tail, double tol) {
  const int m = g0.m();
  std::vector<int> marginal = (m == 1) ? std::vector<int>{0} : std::vector<int>{0, m - 1};
  const double T = (tail.T > rho_min) ? tail.T : rho_min;

  std::vector<CxFn> out;
  for (int q : marginal) {
    const std::complex<double> mu = g0.exponents()[q];
    const std::complex<double> aq = g0.amplitudes()[q];

    std::complex<double> I(0.0, 0.0);
    if (T > rho_min) {
      auto integrand = [&](double tau) { return std::exp(-mu * tau) * rhs(tau); };
      QuadResult r = integrate(integrand, rho_min, T, 0.0, tol, 8000);
      if (!r.converged)
        throw std::runtime_error("marginal_corrections: quadrature did not converge");
      I = r.value;
    }
    if (tail.amp != 0.0) {
      // int_T^inf e^{-mu tau} amp e^{i z tau} tau^{-e} d tau; the effective
      // frequency is z - c lambda_q, real for a marginal-rate tail.
      const std::complex<double> delta =
          tail.z - std::complex<double>(0.0, -1.0) * mu;  // z - c lambda_q
      I += tail.amp * tail_osc(delta, T, tail.e, tol);
    }

    const std::complex<double> amp_total = aq * I;
    out.push_back([amp_total, mu](double rho) { return amp_total * std::exp(mu * rho); });
  }
  return out;
}

}  // namespace gforge
