// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner.  Each gate builds what it needs (or reuses what an
// earlier gate constructed), measures, and records named checks with the
// threshold each measurement was held to.  Limits arrive once through
// VerifyOptions; nothing in here adapts a threshold to the data.

#include "gforge/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gforge/greens.hpp"
#include "gforge/params.hpp"
#include "gforge/solver.hpp"
#include "gforge/spectral.hpp"
#include "gforge/tables.hpp"
#include "gforge/transform.hpp"

namespace gforge {

void GateResult::add(const std::string& check, bool ok, double measured, double limit,
                     const std::string& note) {
  checks.push_back(GateCheck{check, ok, measured, limit, note});
  if (!ok) pass = false;
}

namespace {

using cplx = std::complex<double>;
using clk = std::chrono::steady_clock;

constexpr double kPi = 3.14159265358979323846;

double secs_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

std::string fam_tag(const Params& p) {
  return "(" + std::to_string(p.n) + "," + std::to_string(p.m) + ")";
}

// Deterministic rational probes.  A fixed-seed congruential walk keeps the
// exact-identity gate reproducible byte for byte across runs and toolchains;
// the standard distributions make no such promise.
struct RatWalk {
  unsigned long long state = 0x9E3779B97F4A7C15ull;
  int next_int(int lo, int hi) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return lo + static_cast<int>((state >> 33) %
                                 static_cast<unsigned long long>(hi - lo + 1));
  }
  BigRational next(int lo = -30, int hi = 30, int den_max = 12) {
    const int num = next_int(lo, hi);
    const int den = next_int(1, den_max);
    return BigRational(num, den);
  }
};

// Families and kernel integrals shared between gates.  Construction costs
// are charged to the first gate that needs each object.
struct SharedState {
  std::unique_ptr<FormalSolution> s01, s12, s02;
  std::unique_ptr<KernelIntegral> k01_tight, k01;
};

// Tail margin that leaves the decay fit at least 1.5 decades between the
// innermost gate band and the tabulation tail.
double fit_margin(const Params& p, int lmax, double floor_margin) {
  const double R = std::max(p.r1_min, 3.0);
  const double hi_needed = 4.0 * R * std::pow(10.0, 1.5 / p.s0.to_double()) / 0.8 + 10.0;
  return std::max(floor_margin, hi_needed - 4.0 * R * static_cast<double>(lmax + 1));
}

std::unique_ptr<FormalSolution> build_family(int n, int m, int lmax) {
  const Params p = derive_params(n, m);
  SolverConfig cfg;
  cfg.ell_max = lmax;
  cfg.tail_margin = fit_margin(p, lmax, 36.0);
  auto fs = std::make_unique<FormalSolution>(p, cfg);
  fs->solve_to(lmax);
  return fs;
}

// ---------------------------------------------------------------------------
// gate 1: exact identities
// ---------------------------------------------------------------------------

GateResult gate_exact_identities() {
  GateResult g;
  g.name = "exact-identities";
  g.budget_seconds = 60.0;

  {
    int bad = 0, total = 0;
    for (int n = 0; n <= 3; ++n)
      for (bool odd : {false, true})
        for (int k = 0; k <= 10; ++k) {
          ++total;
          if (!eigen_residual(eigenfunction(odd, k, n)).is_zero()) ++bad;
        }
    g.add("eigen-residual-zero", bad == 0, bad, 0.0,
          std::to_string(total) + " cases, n <= 3, k <= 10, both parities");
  }

  {
    int bad = 0, total = 0;
    for (int n = 0; n <= 3; ++n)
      for (bool odd : {false, true})
        for (int k = 0; k <= 8; ++k)
          for (int q = k + 1; q <= 8; ++q) {
            ++total;
            if (!inner_product(eigenfunction(odd, k, n), eigenfunction(odd, q, n)).is_zero())
              ++bad;
          }
    ++total;
    if (!inner_product(eigenfunction(false, 2, 1), eigenfunction(true, 3, 1)).is_zero()) ++bad;
    g.add("orthogonality-zero", bad == 0, bad, 0.0, std::to_string(total) + " pairs");
  }

  {
    int bad = 0, total = 0;
    for (int n = 0; n <= 2; ++n) {
      const DeltaTable& dt = delta_table(n, 8, 6);
      for (int k = 0; k <= 8; ++k)
        for (int i = 0; i <= 6; ++i) {
          const auto oracle = delta_oracle(n, k, i);
          for (int j = -i; j <= i; ++j) {
            if (k + j < 0) continue;
            ++total;
            const auto it = oracle.find(j);
            if (it == oracle.end() || !(dt.get(k, i, j) == it->second)) ++bad;
          }
        }
    }
    g.add("ladder-table-vs-oracle", bad == 0, bad, 0.0,
          std::to_string(total) + " entries, n <= 2, k <= 8, i <= 6");
  }

  {
    const BDTables t = bd_tables(8, 10);
    RatWalk rw;
    int bad = 0, total = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const BigRational a = rw.next();
      const BigRational th = rw.next();
      for (int p = 1; p <= 8; ++p) {
        BigRational lhs(1);
        for (int q = 1; q <= p; ++q) lhs *= BigRational(1) + a - BigRational(q) * th;
        BigRational rhs;
        const BigRational base = BigRational(1) - th + a;
        for (int l = 1; l <= p; ++l)
          rhs += (-th).pow(l - 1) * t.b[p][l] * base.pow(p + 1 - l);
        ++total;
        if (!(lhs == rhs)) ++bad;
      }
    }
    for (int nu = 1; nu <= 8; ++nu) {
      for (int a = 0; a <= 16; ++a) {
        BigRational lhs = BigRational(a).pow(nu);
        BigRational rhs;
        for (int i = 1; i <= nu; ++i)
          rhs += t.d[nu][i] * pochhammer(BigRational(a), nu + 1 - i);
        ++total;
        if (!(lhs == rhs)) ++bad;
      }
      for (int i = 1; i <= nu; ++i) {
        ++total;
        if (!(t.d[nu][i] == stirling2(nu, nu + 1 - i))) ++bad;
      }
    }
    g.add("descent-coefficient-identities", bad == 0, bad, 0.0,
          std::to_string(total) + " probes, 50 rational trials");
  }

  {
    RatWalk rw;
    int bad = 0, total = 0;
    const std::pair<int, int> fams[] = {{0, 1}, {1, 1}, {0, 2}, {1, 2}, {2, 3}};
    for (const auto& [n, m] : fams) {
      const Params p = derive_params(n, m);
      std::vector<std::pair<BigRational, BigRational>> probes;
      probes.emplace_back(BigRational(0), BigRational(0));
      for (int i = 0; i < 5; ++i) probes.emplace_back(rw.next(-8, 8, 6), rw.next(-8, 8, 6));
      const BigRational f(2 * n);
      ++total;
      if (!p_oracle(p_coeffs(2 * m, p.theta, p.gamma, p.q1, f), probes).pass) ++bad;
      ++total;
      if (!p_oracle(p_coeffs(2 * m - 1, p.theta, p.gamma, p.q2, f), probes).pass) ++bad;
      // The seed exponent was chosen so the first transport row kills the
      // ground mode; the cancellation must be an exact rational zero.
      const BigRational delta(-(2 * n + 1), 2);
      ++total;
      if (!(p.p10 + p.p11 * delta == BigRational(0))) ++bad;
    }
    g.add("transport-oracle-and-seed", bad == 0, bad, 0.0, "five (n,m) families");
  }

  return g;
}

// ---------------------------------------------------------------------------
// gate 2: fundamental solutions
// ---------------------------------------------------------------------------

GateResult gate_fundamental(const VerifyOptions& opt) {
  GateResult g;
  g.name = "fundamental-solutions";

  double worst_weak = 0.0, worst_fd = 0.0, worst_env = 0.0;
  bool finite_ok = true;
  for (int m = 1; m <= 3; ++m) {
    for (int p = 0; p <= 2; ++p) {
      const GreensFn G = greens(ode_operator(m, eigenvalue(0, p / 2, p % 2)));
      worst_weak = std::max(
          worst_weak, weak_delta_check(G, {{0.0, 1.0}, {0.3, 0.8}, {-0.6, 1.2}}));

      for (int ell = 1; ell <= 2 * m - 1; ++ell)
        for (double rho : {0.7, 1.9, -1.1}) {
          auto d1 = [&](double h) {
            return (G.deriv(ell - 1, rho + h) - G.deriv(ell - 1, rho - h)) / (2.0 * h);
          };
          const cplx fd = (4.0 * d1(5e-4) - d1(1e-3)) / 3.0;
          const cplx ex = G.deriv(ell, rho);
          worst_fd = std::max(worst_fd, std::abs(fd - ex) / std::max(std::abs(ex), 1e-30));
        }

      const double norm = std::pow(G.op().c_d, 2 * m - 1);
      for (int i = 0; i <= 24; ++i) {
        const double rho = std::pow(10.0, -2.0 + 3.2 * i / 24.0);
        worst_env = std::max(
            worst_env, std::abs(G.eval(rho)) * norm * std::exp(G.decay_rate() * rho));
      }
      finite_ok = finite_ok && std::isfinite(G.bound_constant());
    }
  }
  g.add("weak-delta", worst_weak <= opt.weak_tol, worst_weak, opt.weak_tol,
        "orders 2, 4, 6; three bumps each");
  g.add("derivative-vs-differences", worst_fd <= 1e-6, worst_fd, 1e-6,
        "all orders below the jump");
  // The mode-sum envelope keeps |G| c^(2m-1) e^(rate rho) at or below one
  // half; the gate allows five percent for sampling off the recorded grid.
  g.add("decay-envelope", finite_ok && worst_env <= 0.525, worst_env, 0.525,
        "log grid rho in [1e-2, 10^1.2]");

  {
    const GreensFn G1 = greens(ode_operator(1, BigRational(1)));
    double worst = 0.0;
    for (double rho : {0.0, 0.3, -0.7, 1.5, -2.5, 3.5}) {
      const cplx ref = -0.25 * std::exp(-2.0 * std::abs(rho));
      worst = std::max(worst, std::abs(G1.eval(rho) - ref) / std::abs(ref));
    }
    g.add("order-two-closed-form", worst <= 1e-10, worst, 1e-10, "-(1/4) e^(-2|rho|)");
  }

  return g;
}

// ---------------------------------------------------------------------------
// gate 3: the construction
// ---------------------------------------------------------------------------

GateResult gate_construction(SharedState& st, const VerifyOptions& opt) {
  GateResult g;
  g.name = "construction";
  g.budget_seconds = 300.0;

  st.s01 = build_family(0, 1, opt.ell_max);
  st.s12 = build_family(1, 2, opt.ell_max);

  for (const FormalSolution* fs : {st.s01.get(), st.s12.get()}) {
    const Params& p = fs->params();
    const std::string fam = fam_tag(p);
    const GrowthReport rep = fs->growth_certificate();

    double worst = 0.0;
    int rows = 0;
    for (int ell = 1; ell <= fs->solved_ell(); ++ell) {
      // Center the test bump past the forcing onset of the level.
      const BumpSpec phi{3.0 * fs->r1() * (ell + 1), 2.5};
      const int pmax = static_cast<int>(rep.S[ell].size()) - 1;
      for (int q = 0; q <= pmax; ++q) {
        worst = std::max(worst, fs->weak_residual(ell, q, phi));
        ++rows;
      }
    }
    for (int q = 0; q <= static_cast<int>(rep.S[1].size()) - 1; ++q)
      worst = std::max(worst, fs->weak_residual(1, q, {8.0 * fs->r1(), 3.0}));
    g.add("weak-residuals" + fam, worst <= opt.weak_tol, worst, opt.weak_tol,
          std::to_string(rows) + " rows, every solved level");

    // Level-one envelope |g_{1,p}| <= C^2 rho^(-1) e^(-c0 rho), evaluated in
    // logs so the far grid cannot overflow the weight.
    const double c0 = p.c0.to_double();
    double log_c2 = -std::numeric_limits<double>::infinity();
    const int pmax1 = static_cast<int>(rep.S[1].size()) - 1;
    for (int q = 0; q <= pmax1; ++q)
      for (int i = 0; i <= 400; ++i) {
        const double rho = 1.0 + (fs->grid().hi() - 1.0) * i / 400.0;
        const double a = std::abs(fs->level(1, q).eval(0, rho));
        if (a > 0.0) log_c2 = std::max(log_c2, std::log(a) + c0 * rho + std::log(rho));
      }
    const double c_env = std::exp(0.5 * log_c2);
    g.add("level-one-envelope" + fam, std::isfinite(c_env) && c_env < 1e6, c_env, 1e6,
          "least admissible constant");

    const bool growth_ok = rep.fit_r2 >= 0.9 && rep.decay_ok &&
                           std::isfinite(rep.c_level) && rep.c_level > 0.0;
    g.add("growth-certificate" + fam, growth_ok, rep.fit_r2, 0.9,
          "C = " + fmt(rep.c_level) + ", k-scaling " + fmt(rep.k_scaling) +
              ", u-fit r2 " + fmt(rep.u_fit_r2));
  }

  return g;
}

// ---------------------------------------------------------------------------
// gate 4: remainder support
// ---------------------------------------------------------------------------

GateResult gate_remainder(SharedState& st, const VerifyOptions& opt) {
  GateResult g;
  g.name = "remainder-support";

  for (const FormalSolution* fs : {st.s01.get(), st.s12.get()}) {
    const std::string fam = fam_tag(fs->params());
    const RemainderExpansion rem(*fs);

    double worst = 0.0;
    for (int ell = 1; ell <= rem.complete_bracket(); ++ell)
      worst = std::max(worst, rem.support_violation(ell));
    g.add("vanishing-past-window" + fam, worst <= opt.support_tol, worst, opt.support_tol,
          "ell <= " + std::to_string(rem.complete_bracket()));

    int bad = 0, total = 0;
    for (int ell = 1; ell <= rem.complete_bracket(); ++ell) {
      const double lo = rem.support_lo(ell);
      if (lo <= 0.0) continue;
      for (double t : {0.3, 1.1}) {
        ++total;
        if (rem.w_eval(ell, t, 0.98 * lo) != cplx(0.0, 0.0)) ++bad;
      }
    }
    g.add("exact-zero-below-onset" + fam, bad == 0, bad, 0.0,
          std::to_string(total) + " samples");
  }

  return g;
}

// ---------------------------------------------------------------------------
// gate 5: operator application
// ---------------------------------------------------------------------------

GateResult gate_operator(SharedState& st, const VerifyOptions& opt) {
  GateResult g;
  g.name = "operator-application";

  // Differencing divides the quadrature error by the squared step, so this
  // probe runs on a much tighter budget than plain evaluation.
  QuadBudget b;
  b.rel_tol = 3e-11;
  b.max_panels = 240000;
  st.k01_tight = std::make_unique<KernelIntegral>(*st.s01, b);

  const std::vector<std::pair<double, double>> pts = {
      {0.3, 0.0}, {0.45, 0.2}, {0.6, -0.35}, {0.8, 0.5}, {1.0, 0.6}};
  const ApplyCheckReport rep = operator_apply_check(*st.k01_tight, pts, opt.apply_tol);
  int noisy = 0;
  for (const auto& p : rep.points) noisy += p.noise_limited ? 1 : 0;
  g.add("reduction-identity", rep.pass, rep.max_rel_err, rep.tol,
        std::to_string(pts.size()) + " generic points");
  g.add("difference-noise-floor", noisy == 0, noisy, 0.0,
        "points limited by step noise");

  return g;
}

// ---------------------------------------------------------------------------
// gate 6: decay exponents
// ---------------------------------------------------------------------------

GateResult gate_exponents(SharedState& st, const VerifyOptions& opt,
                          std::map<std::pair<int, int>, VerifySummary>* fits) {
  GateResult g;
  g.name = "decay-exponents";
  g.budget_seconds = 600.0;

  st.s02 = build_family(0, 2, 4);
  for (const FormalSolution* fs : {st.s01.get(), st.s02.get(), st.s12.get()}) {
    const Params& p = fs->params();
    const std::string fam = fam_tag(p);
    const GevreyFit fit = gevrey_fit(fourier_trace(*fs));
    const double s0 = p.s0.to_double();
    const double c0 = p.c0.to_double();
    const double sdev = std::abs(fit.s_hat - s0) / s0;
    const double cdev = std::abs(fit.c_hat - c0) / c0;
    g.add("index" + fam, fit.identifiable && sdev <= opt.fit_s_rtol, sdev, opt.fit_s_rtol,
          "s-hat " + fmt(fit.s_hat) + " target " + fmt(s0) +
              (fit.identifiable ? "" : ", fit not identifiable"));
    g.add("rate" + fam, cdev <= opt.fit_c_rtol, cdev, opt.fit_c_rtol,
          "c-hat " + fmt(fit.c_hat) + " target " + fmt(c0));
    (*fits)[{p.n, p.m}] = VerifySummary{
        fit.s_hat, s0, fit.c_hat, c0,
        fit.identifiable && sdev <= opt.fit_s_rtol && cdev <= opt.fit_c_rtol};
  }

  return g;
}

// ---------------------------------------------------------------------------
// gate 7: mode bounds
// ---------------------------------------------------------------------------

GateResult gate_bounds() {
  GateResult g;
  g.name = "mode-bounds";

  for (int n = 0; n <= 2; ++n) {
    const std::string tag = "(n=" + std::to_string(n) + ")";
    const BoundReport rep = bound_suite(8, n);
    const double ta = 1.0 / (2.0 * n + 2.0);
    const double tb = (2.0 * n + 1.0) / (2.0 * n + 2.0);
    const double da = std::abs(rep.gs.mu_a - ta);
    const double db = std::abs(rep.gs.nu_b - tb);
    g.add("moment-exponent" + tag, da <= 0.1, da, 0.1,
          "fitted " + fmt(rep.gs.mu_a) + " target " + fmt(ta));
    g.add("derivative-exponent" + tag, db <= 0.1, db, 0.1,
          "fitted " + fmt(rep.gs.nu_b) + " target " + fmt(tb));

    bool finite_ok = rep.grid_ok;
    double worst_ratio = 0.0;
    for (const auto& row : rep.rows) {
      finite_ok = finite_ok && std::isfinite(row.sup_ratio) &&
                  std::isfinite(row.dsup_ratio) && row.decay_B >= rep.decay_floor;
      worst_ratio = std::max({worst_ratio, row.sup_ratio, row.dsup_ratio});
    }
    g.add("tables-finite" + tag, finite_ok, worst_ratio, 0.0,
          "largest normalized sup ratio, k <= 8");
  }

  return g;
}

// ---------------------------------------------------------------------------
// gate 8: pipeline self-tests
// ---------------------------------------------------------------------------

GateResult gate_pipeline(SharedState& st, const VerifyOptions& opt) {
  GateResult g;
  g.name = "pipeline-self-tests";

  {
    struct Law {
      double s, c, a, b;
    };
    const Law laws[] = {{2.0, 1.3, 0.0, 0.0}, {4.0 / 3.0, 0.94, 0.4, 0.3}};
    double worst = 0.0;
    for (const Law& law : laws) {
      std::vector<double> eta(60), lf(60);
      for (int i = 0; i < 60; ++i) {
        eta[i] = 8.0 * std::pow(10.0, 1.7 * i / 59.0);
        lf[i] = law.a + law.b * std::log(eta[i]) - law.c * std::pow(eta[i], 1.0 / law.s);
      }
      const GevreyFit fit = gevrey_fit(eta, lf);
      worst = std::max({worst, std::abs(fit.s_hat - law.s) / law.s,
                        std::abs(fit.c_hat - law.c) / law.c});
    }
    g.add("synthetic-recovery", worst <= 0.01, worst, 0.01,
          "two stretched-exponential laws");
  }

  {
    st.k01 = std::make_unique<KernelIntegral>(*st.s01);
    const Params& p = st.s01->params();
    const double s0 = p.s0.to_double();
    const double mu = (p.r.to_double() + 1.0) / s0 - 1.0;
    double worst = 0.0;
    for (double rho : {13.0, 14.5, 16.0}) {
      const double eta = std::pow(rho, s0);
      const cplx trace = (2.0 * kPi / s0) * std::pow(eta, mu) *
                         st.s01->assemble_d(AssembleMode::tilde, 0.0, rho);
      const cplx direct = st.k01->fourier_direct(eta);
      worst = std::max(worst,
                       std::abs(trace - direct) /
                           std::max({std::abs(trace), std::abs(direct), 1e-300}));
    }
    g.add("trace-vs-direct", worst <= 1e-3, worst, 1e-3, "three spot frequencies");
  }

  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

VerifyReport run_acceptance(const VerifyOptions& opt) {
  VerifyReport rep;
  SharedState st;
  std::map<std::pair<int, int>, VerifySummary> fits;
  const clk::time_point start = clk::now();

  int index = 0;
  const auto record = [&](GateResult g, clk::time_point t0) {
    g.seconds = secs_since(t0);
    ++index;
    if (opt.log) {
      (*opt.log) << "gate " << index << "/8 " << g.name << ": "
                 << (g.pass ? "pass" : "FAIL") << " (" << fmt(g.seconds) << "s)\n";
      opt.log->flush();
    }
    rep.gates.push_back(std::move(g));
  };

  clk::time_point t0 = clk::now();
  record(gate_exact_identities(), t0);
  t0 = clk::now();
  record(gate_fundamental(opt), t0);
  t0 = clk::now();
  record(gate_construction(st, opt), t0);
  t0 = clk::now();
  record(gate_remainder(st, opt), t0);
  t0 = clk::now();
  record(gate_operator(st, opt), t0);
  t0 = clk::now();
  record(gate_exponents(st, opt, &fits), t0);
  t0 = clk::now();
  record(gate_bounds(), t0);
  t0 = clk::now();
  record(gate_pipeline(st, opt), t0);

  rep.all_pass = true;
  rep.budgets_ok = true;
  for (const GateResult& g : rep.gates) {
    rep.all_pass = rep.all_pass && g.pass;
    rep.budgets_ok = rep.budgets_ok && g.within_budget();
  }

  const auto it = fits.find({opt.feature_n, opt.feature_m});
  rep.summary = it != fits.end() ? it->second : fits.at({0, 1});
  rep.total_seconds = secs_since(start);
  return rep;
}

}  // namespace gforge
