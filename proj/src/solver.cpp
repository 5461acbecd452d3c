// SPDX-License-Identifier: Apache-2.0

#include "gforge/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "gforge/quadrature.hpp"
#include "json.hpp"

namespace gforge {

namespace {

using cplx = std::complex<double>;

// 7-point Gauss-Legendre nodes and weights on [-1, 1], ascending.
constexpr double kGlX[7] = {-0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
                            0.0,                 0.4058451513773972,  0.7415311855993945,
                            0.9491079123427585};
constexpr double kGlW[7] = {0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
                            0.4179591836734694, 0.3818300505051189, 0.2797053914892766,
                            0.1294849661688697};

cplx cpow_int(cplx z, int k) {
  cplx r(1.0, 0.0);
  for (int i = 0; i < k; ++i) r *= z;
  return r;
}

// Rising factorial e (e+1) ... (e+h-1).
double poch_rise(int e, int h) {
  double r = 1.0;
  for (int i = 0; i < h; ++i) r *= static_cast<double>(e + i);
  return r;
}

// out += coef * sum_h (e)_h / w^(h+1) * rho^-(e+h) on phase q, orders capped
// by the window of `out`.
void accumulate_series(AsymModel& out, int q, int e, cplx coef, cplx w, double sign) {
  cplx wp = 1.0 / w;
  const int terms = out.terms();
  for (int h = 0;; ++h) {
    const int idx = e + h - out.e_min;
    if (idx >= terms) break;
    if (idx >= 0) out.beta[q][idx] += coef * (sign * poch_rise(e, h)) * wp;
    wp /= w;
  }
}

double sqr(double x) { return x * x; }

}  // namespace

// ---- Grid ----------------------------------------------------------------------

int Grid::panel_of(double rho) const {
  int i = static_cast<int>(std::floor((rho - lo) / h));
  return std::clamp(i, 0, n - 2);
}

// ---- AsymModel -----------------------------------------------------------------

AsymModel AsymModel::zero(const std::vector<cplx>& phases, int e_min, int terms) {
  AsymModel m;
  m.phase = phases;
  m.e_min = e_min;
  m.beta.assign(phases.size(), std::vector<cplx>(terms, cplx(0.0, 0.0)));
  return m;
}

cplx AsymModel::eval(double rho) const {
  cplx total(0.0, 0.0);
  for (size_t q = 0; q < phase.size(); ++q) {
    cplx inner(0.0, 0.0);
    double rp = std::pow(rho, -e_min);
    for (const cplx& b : beta[q]) {
      inner += b * rp;
      rp /= rho;
    }
    total += std::exp(phase[q] * rho) * inner;
  }
  return total;
}

AsymModel AsymModel::derivative() const {
  AsymModel out = zero(phase, e_min, terms());
  const int K = terms();
  for (size_t q = 0; q < phase.size(); ++q) {
    for (int j = 0; j < K; ++j) {
      out.beta[q][j] += phase[q] * beta[q][j];
      if (j + 1 < K) out.beta[q][j + 1] -= static_cast<double>(e_min + j) * beta[q][j];
    }
  }
  return out;
}

AsymModel AsymModel::rho_shift(int i) const {
  AsymModel out = *this;
  out.e_min += i;
  return out;
}

void AsymModel::accumulate(cplx w, const AsymModel& other) {
  const int K = terms();
  for (size_t q = 0; q < phase.size(); ++q) {
    for (int j = 0; j < other.terms(); ++j) {
      const int idx = other.e_min + j - e_min;
      if (idx < 0) throw std::logic_error("AsymModel: window misses a dominant order");
      if (idx < K) beta[q][idx] += w * other.beta[q][j];
    }
  }
}

AsymModel propagate_model(const AsymModel& fm, const GreensFn& G, bool corrected) {
  const int m = G.m();
  const int K = fm.terms();
  const int nq = static_cast<int>(fm.phase.size());
  AsymModel out = AsymModel::zero(fm.phase, corrected ? fm.e_min - 1 : fm.e_min, K);
  const auto& A = G.amplitudes();
  const auto& MU = G.exponents();
  for (int q = 0; q < nq; ++q) {
    const cplx z = fm.phase[q];
    for (int j = 0; j < K; ++j) {
      const cplx b = fm.beta[q][j];
      if (b == cplx(0.0, 0.0)) continue;
      const int e = fm.e_min + j;
      for (int jm = 0; jm < m; ++jm) {
        const cplx coef = b * A[jm];
        const cplx mu = MU[jm];
        // The part of the convolution anchored above rho carries (z + mu).
        accumulate_series(out, q, e, coef, z + mu, -1.0);
        const bool marginal = corrected && (jm == 0 || jm == m - 1);
        const int q_of = (jm == 0) ? 0 : nq - 1;
        if (marginal && q == q_of) {
          // Phase-matched marginal mode: the homogeneous subtraction leaves
          // the exact integral of rho^-e, one order more dominant.
          if (e < 2) throw std::logic_error("far-field model: marginal order too low");
          const int idx = (e - 1) - out.e_min;
          if (idx >= 0 && idx < K) out.beta[q][idx] -= coef / static_cast<double>(e - 1);
        } else {
          // Ordinary below-rho part; for a corrected marginal mode against
          // the opposite phase the subtracted form telescopes to the same
          // series, with (z - mu) now purely oscillatory.
          accumulate_series(out, q, e, coef, z - mu, +1.0);
        }
      }
    }
  }
  return out;
}

// ---- LevelFn -------------------------------------------------------------------

cplx LevelFn::eval(int k, double rho) const {
  if (k < 0 || k > depth_) throw std::invalid_argument("LevelFn: derivative order out of range");
  if (analytic_) return cpow_int(seed_mu_, k) * std::exp(seed_mu_ * rho);
  const Grid& G = *grid_;
  if (rho < G.lo) return cplx(0.0, 0.0);
  if (rho > G.hi()) {
    while (static_cast<int>(model_derivs_.size()) <= k)
      model_derivs_.push_back(model_derivs_.empty() ? model_ : model_derivs_.back().derivative());
    return model_derivs_[k].eval(rho);
  }
  // Points landing on a grid node read the stored jet directly.  High
  // derivative orders extracted from the two-point interpolant lose several
  // digits to rounding, and on-node queries are the common case inside the
  // row assembly.
  const int near = static_cast<int>(std::lround((rho - G.lo) / G.h));
  if (near >= 0 && near < G.n && std::abs(rho - G.node(near)) < 1e-9 * G.h)
    return jets_[k][near];
  const int panel = G.panel_of(rho);
  if (panel != cache_panel_) {
    std::array<cplx, 16> f0{}, f1{};
    for (int j = 0; j <= depth_; ++j) {
      f0[j] = jets_[j][panel];
      f1[j] = jets_[j][panel + 1];
    }
    cache_.build(G.node(panel), G.node(panel + 1), f0.data(), f1.data(), depth_);
    cache_panel_ = panel;
  }
  std::array<cplx, 16> out{};
  cache_.eval(rho, k, out.data());
  return out[k];
}

// ---- FormalSolution: setup -----------------------------------------------------

FormalSolution::FormalSolution(const Params& params, const SolverConfig& cfg)
    : params_(params), cfg_(cfg) {
  init_derived();
  seed_level0();
}

void FormalSolution::init_derived() {
  const int m = params_.m;
  if (cfg_.ell_max < 0) throw std::invalid_argument("solver: ell_max must be nonnegative");
  r1_ = cfg_.r1 > 0.0 ? cfg_.r1 : params_.r1_min;
  r_omega_ = cfg_.r_omega > 0.0 ? cfg_.r_omega : std::max(r1_, 3.0);
  if (cfg_.h <= 0.0) cfg_.h = (m == 1) ? 0.01 : 0.02;
  capacity_ = std::max(cfg_.grid_capacity_ell, cfg_.ell_max);
  cfg_.grid_capacity_ell = capacity_;

  const double T = 4.0 * r_omega_ * (capacity_ + 1) + cfg_.tail_margin;
  Grid g;
  g.lo = cfg_.rho_lo;
  g.h = cfg_.h;
  g.n = static_cast<int>(std::ceil((T - g.lo) / g.h)) + 1;
  grid_ = std::make_shared<const Grid>(g);

  si_ = std::make_unique<SiTables>(si_tables(params_));

  // The marginal phases are the slowest modes of the ground kernel; the seed
  // exponent must coincide with the first of them.
  const GreensFn& G0 = kernel(0);
  phases_.clear();
  phases_.push_back(G0.exponents()[0]);
  if (m >= 2) phases_.push_back(G0.exponents()[m - 1]);
  const cplx c1 = params_.c1.to_complex();
  if (std::abs(-c1 - phases_[0]) > 1e-10 * std::abs(c1))
    throw std::logic_error("solver: seed exponent does not match the slowest kernel mode");
}

void FormalSolution::seed_level0() {
  const int depth = 2 * params_.m + 1;
  auto fn = std::make_unique<LevelFn>();
  fn->ell_ = 0;
  fn->p_ = 0;
  fn->depth_ = depth;
  fn->analytic_ = true;
  fn->seed_mu_ = phases_[0];
  fn->grid_ = grid_;
  fn->jets_.assign(depth + 1, std::vector<cplx>(grid_->n));
  for (int i = 0; i < grid_->n; ++i) {
    const cplx base = std::exp(phases_[0] * grid_->node(i));
    cplx mp(1.0, 0.0);
    for (int k = 0; k <= depth; ++k) {
      fn->jets_[k][i] = mp * base;
      mp *= phases_[0];
    }
  }
  fn->model_ = AsymModel::zero(phases_, 0, cfg_.model_terms);
  fn->model_.beta[0][0] = cplx(1.0, 0.0);
  fn->overlap_ = 0.0;
  levels_.clear();
  levels_.emplace_back();
  levels_[0].push_back(std::move(fn));
  solved_ell_ = 0;
}

// ---- cached sub-objects ----------------------------------------------------------

const GreensFn& FormalSolution::kernel(int p) const {
  if (p < 0) throw std::invalid_argument("solver: negative mode index");
  if (static_cast<int>(kernels_.size()) <= p) kernels_.resize(p + 1);
  if (!kernels_[p])
    kernels_[p] = std::make_unique<GreensFn>(greens(ode_operator(params_.m, eigenvalue(params_.n, p))));
  return *kernels_[p];
}

const ChiCutoff& FormalSolution::chi(int ell) const {
  if (ell < 0) throw std::invalid_argument("solver: negative level");
  if (static_cast<int>(chis_.size()) <= ell) chis_.resize(ell + 1);
  if (!chis_[ell]) chis_[ell] = std::make_unique<ChiCutoff>(ell, r1_);
  return *chis_[ell];
}

const OmegaCutoff& FormalSolution::omega(int ell) const {
  if (ell < 0) throw std::invalid_argument("solver: negative level");
  if (static_cast<int>(omegas_.size()) <= ell) omegas_.resize(ell + 1);
  if (!omegas_[ell]) omegas_[ell] = std::make_unique<OmegaCutoff>(ell, r_omega_, params_.m);
  return *omegas_[ell];
}

const EigenFn& FormalSolution::mode(int p) const {
  if (p < 0) throw std::invalid_argument("solver: negative mode index");
  if (static_cast<int>(modes_.size()) <= p) modes_.resize(p + 1);
  if (!modes_[p]) modes_[p] = std::make_unique<EigenFn>(eigenfunction(false, p, params_.n));
  return *modes_[p];
}

const LevelFn& FormalSolution::level(int ell, int p) const {
  if (ell < 0 || ell >= static_cast<int>(levels_.size()) || p < 0 ||
      p >= static_cast<int>(levels_[ell].size()) || !levels_[ell][p])
    throw std::out_of_range("solver: level not solved");
  return *levels_[ell][p];
}

// ---- right-hand side structure ----------------------------------------------------

std::vector<RhsTerm> FormalSolution::build_terms(int ell, int p) const {
  const int twom = 2 * params_.m;
  std::vector<RhsTerm> out;
  if (ell == 0) return out;
  const DeltaTable& dt = delta_table(params_.n, capacity_ + 1, twom);
  if (p >= 1) {
    // Theta_p g_{ell,p} = -sum_i rho^-i sum_p1 W_i(p1, p - p1) g_{ell-i,p1}^(2m-i).
    for (int i = 1; i <= std::min(ell, twom); ++i) {
      const int src = ell - i;
      for (int p1 = std::max(0, p - i); p1 <= std::min(src, p + i); ++p1) {
        BigRational w = transport_weight(*si_, dt, i, p1, p - p1);
        if (w.is_zero()) continue;
        w = -w;
        const double wd = w.to_double();
        out.push_back(RhsTerm{i, src, p1, twom - i, std::move(w), wd});
      }
    }
  } else {
    // The ground row couples one bookkeeping order lower: level ell+1-i feeds
    // through W_i(p1, -p1).  The diagonal i = 1, p1 = 0 weight vanishes
    // identically (that cancellation fixed the seed exponent), so the i = 1
    // block reduces to the single p1 = 1 backflow term.
    for (int i = 1; i <= std::min(ell + 1, twom); ++i) {
      const int src = ell + 1 - i;
      for (int p1 = 0; p1 <= std::min(src, i); ++p1) {
        if (src == ell && p1 == 0) {
          // Self-coupling of the unknown itself; its weight is identically
          // zero, asserted rather than silently skipped.
          if (!transport_weight(*si_, dt, i, p1, -p1).is_zero())
            throw std::logic_error("solver: ground-row self-coupling did not cancel");
          continue;
        }
        BigRational w = transport_weight(*si_, dt, i, p1, -p1);
        if (w.is_zero()) continue;
        w = -w;
        const double wd = w.to_double();
        out.push_back(RhsTerm{i, src, p1, twom - i, std::move(w), wd});
      }
    }
  }
  return out;
}

std::vector<RhsTerm> FormalSolution::rhs_terms(int ell, int p) const {
  if (ell < 0 || p < 0 || p > ell) throw std::invalid_argument("solver: bad row index");
  return build_terms(ell, p);
}

cplx FormalSolution::eval_terms(const std::vector<RhsTerm>& terms, double rho) const {
  cplx acc(0.0, 0.0);
  for (const RhsTerm& t : terms) {
    if (t.src_ell >= static_cast<int>(levels_.size()) ||
        t.p1 >= static_cast<int>(levels_[t.src_ell].size()) || !levels_[t.src_ell][t.p1])
      throw std::logic_error("solver: right-hand side depends on an unsolved level");
    acc += t.weight_d * std::pow(rho, -t.i) * levels_[t.src_ell][t.p1]->eval(t.ord, rho);
  }
  return acc;
}

cplx FormalSolution::eval_terms_deriv(const std::vector<RhsTerm>& terms, double rho) const {
  cplx acc(0.0, 0.0);
  for (const RhsTerm& t : terms) {
    const LevelFn& g = *levels_[t.src_ell][t.p1];
    acc += t.weight_d * (std::pow(rho, -t.i) * g.eval(t.ord + 1, rho) -
                         t.i * std::pow(rho, -t.i - 1) * g.eval(t.ord, rho));
  }
  return acc;
}

std::complex<double> FormalSolution::rhs_value(int ell, int p, double rho) const {
  return eval_terms(rhs_terms(ell, p), rho);
}

std::complex<double> FormalSolution::forced_value(int ell, int p, double rho) const {
  const double c = chi(ell).eval(0, rho);
  return c == 0.0 ? cplx(0.0, 0.0) : c * rhs_value(ell, p, rho);
}

AsymModel FormalSolution::rhs_model(const std::vector<RhsTerm>& terms) const {
  int e_min = std::numeric_limits<int>::max();
  for (const RhsTerm& t : terms)
    e_min = std::min(e_min, levels_[t.src_ell][t.p1]->model().e_min + t.i);
  AsymModel out = AsymModel::zero(phases_, e_min, cfg_.model_terms);
  for (const RhsTerm& t : terms) {
    AsymModel dm = levels_[t.src_ell][t.p1]->model();
    for (int d = 0; d < t.ord; ++d) dm = dm.derivative();
    out.accumulate(cplx(t.weight_d, 0.0), dm.rho_shift(t.i));
  }
  return out;
}

// ---- the level solve ---------------------------------------------------------------

// Scratch of one transport row during a level solve: the kernel data, the
// precomputed panel-edge exponentials, the panel quadrature accumulators,
// and the forcing samples.
struct FormalSolution::Row {
  int p = 0;
  const GreensFn* K = nullptr;
  double cst = 0.0;
  std::vector<cplx> a, mu, emuh;
  std::vector<std::array<cplx, 7>> eL, eR;  // panel-edge kernels at GL offsets
  std::vector<std::vector<cplx>> pL, pR;    // [mode][panel]
  std::vector<cplx> F, Fp;                  // forcing and its derivative at nodes
  // Marginal machinery, ground row only.
  bool corrected = false;
  std::vector<int> marg;  // marginal mode indices
  std::vector<cplx> emuhS;
  std::vector<std::array<cplx, 7>> eS;
  std::vector<std::vector<cplx>> pS;  // [marginal][panel]
  AsymModel fmodel;
};

void FormalSolution::solve_rows(int ell, const std::vector<std::vector<RhsTerm>>& row_terms,
                                const std::vector<int>& row_ids) {
  const Grid& G = *grid_;
  const int N = G.n;
  const double h = G.h;
  const int m = params_.m;
  const int twom = 2 * m;
  const int depth = twom + 1;
  const int R = static_cast<int>(row_ids.size());
  const ChiCutoff& cl = chi(ell);
  if (!(cl.hi() + 2.0 < G.hi()))
    throw std::logic_error("solver: grid does not extend past the forcing band");

  // Group the forcing terms by source so each lower-level evaluation is
  // shared across every row it feeds.
  struct Sink {
    int row;
    double w;
  };
  std::map<std::tuple<int, int, int, int>, std::vector<Sink>> groups;  // (src, p1, ord, i)
  for (int r = 0; r < R; ++r)
    for (const RhsTerm& t : row_terms[r]) {
      if (t.src_ell >= static_cast<int>(levels_.size()) ||
          t.p1 >= static_cast<int>(levels_[t.src_ell].size()) || !levels_[t.src_ell][t.p1])
        throw std::logic_error("solver: right-hand side depends on an unsolved level");
      groups[{t.src_ell, t.p1, t.ord, t.i}].push_back(Sink{r, t.weight_d});
    }

  std::vector<Row> rows(R);
  for (int r = 0; r < R; ++r) {
    Row& rd = rows[r];
    rd.p = row_ids[r];
    rd.K = &kernel(rd.p);
    rd.cst = rd.K->op().const_d;
    rd.a = rd.K->amplitudes();
    rd.mu = rd.K->exponents();
    rd.emuh.resize(m);
    rd.eL.resize(m);
    rd.eR.resize(m);
    rd.pL.assign(m, std::vector<cplx>(N - 1, cplx(0.0, 0.0)));
    rd.pR.assign(m, std::vector<cplx>(N - 1, cplx(0.0, 0.0)));
    for (int j = 0; j < m; ++j) {
      rd.emuh[j] = std::exp(rd.mu[j] * h);
      for (int g = 0; g < 7; ++g) {
        const double offR = h * (kGlX[g] + 1.0) / 2.0;
        rd.eL[j][g] = std::exp(rd.mu[j] * (h - offR));
        rd.eR[j][g] = std::exp(rd.mu[j] * offR);
      }
    }
    rd.corrected = (rd.p == 0);
    if (rd.corrected) {
      rd.marg.push_back(0);
      if (m >= 2) rd.marg.push_back(m - 1);
      const int nq = static_cast<int>(rd.marg.size());
      rd.emuhS.resize(nq);
      rd.eS.resize(nq);
      rd.pS.assign(nq, std::vector<cplx>(N - 1, cplx(0.0, 0.0)));
      for (int q = 0; q < nq; ++q) {
        const cplx mu = rd.mu[rd.marg[q]];
        rd.emuhS[q] = std::exp(-mu * h);
        for (int g = 0; g < 7; ++g) {
          const double offR = h * (kGlX[g] + 1.0) / 2.0;
          rd.eS[q][g] = std::exp(-mu * offR);
        }
      }
    }
    rd.F.assign(N, cplx(0.0, 0.0));
    rd.Fp.assign(N, cplx(0.0, 0.0));
    rd.fmodel = rhs_model(row_terms[r]);
  }

  const int first_panel = std::max(0, G.panel_of(cl.lo()) - 1);
  std::vector<double> invpow(twom + 2);
  std::vector<cplx> fval(R), fder(R);

  // Forcing at the nodes, with its derivative (the top two jet orders close
  // through the ODE and need both).
  for (int i = first_panel; i < N; ++i) {
    const double sigma = G.node(i);
    const double c0 = cl.eval(0, sigma);
    const double c1 = cl.eval(1, sigma);
    if (c0 == 0.0 && c1 == 0.0) continue;
    std::fill(fval.begin(), fval.end(), cplx(0.0, 0.0));
    std::fill(fder.begin(), fder.end(), cplx(0.0, 0.0));
    invpow[0] = 1.0;
    for (int k = 1; k <= twom + 1; ++k) invpow[k] = invpow[k - 1] / sigma;
    for (const auto& [key, sinks] : groups) {
      const auto& [src, p1, ord, iord] = key;
      const LevelFn& gfn = *levels_[src][p1];
      const cplx v = gfn.eval(ord, sigma);
      const cplx vd = gfn.eval(ord + 1, sigma);
      const cplx term = v * invpow[iord];
      const cplx term_d = vd * invpow[iord] - static_cast<double>(iord) * v * invpow[iord + 1];
      for (const Sink& s : sinks) {
        fval[s.row] += s.w * term;
        fder[s.row] += s.w * term_d;
      }
    }
    for (int r = 0; r < R; ++r) {
      rows[r].F[i] = c0 * fval[r];
      rows[r].Fp[i] = c1 * fval[r] + c0 * fder[r];
    }
  }

  // Panel quadrature of the forcing against the mode kernels.
  for (int i = first_panel; i < N - 1; ++i) {
    for (int g = 0; g < 7; ++g) {
      const double sigma = G.node(i) + h * (kGlX[g] + 1.0) / 2.0;
      const double c0 = cl.eval(0, sigma);
      if (c0 == 0.0) continue;
      const double wq = kGlW[g] * h / 2.0;
      std::fill(fval.begin(), fval.end(), cplx(0.0, 0.0));
      invpow[0] = 1.0;
      for (int k = 1; k <= twom; ++k) invpow[k] = invpow[k - 1] / sigma;
      for (const auto& [key, sinks] : groups) {
        const auto& [src, p1, ord, iord] = key;
        const cplx v = levels_[src][p1]->eval(ord, sigma);
        const cplx term = v * invpow[iord];
        for (const Sink& s : sinks) fval[s.row] += s.w * term;
      }
      for (int r = 0; r < R; ++r) {
        Row& rd = rows[r];
        const cplx Fg = (wq * c0) * fval[r];
        for (int j = 0; j < m; ++j) {
          rd.pL[j][i] += rd.eL[j][g] * Fg;
          rd.pR[j][i] += rd.eR[j][g] * Fg;
        }
        for (size_t q = 0; q < rd.marg.size(); ++q) rd.pS[q][i] += rd.eS[q][g] * Fg;
      }
    }
  }

  // Sweep the cumulants and assemble the jets row by row.
  const double T = G.hi();
  for (int r = 0; r < R; ++r) {
    Row& rd = rows[r];
    auto fn = std::make_unique<LevelFn>();
    fn->ell_ = ell;
    fn->p_ = rd.p;
    fn->depth_ = depth;
    fn->grid_ = grid_;
    fn->jets_.assign(depth + 1, std::vector<cplx>(N));

    // Below-rho cumulants, forward.
    std::vector<std::vector<cplx>> Lf(m, std::vector<cplx>(N));
    for (int j = 0; j < m; ++j) {
      cplx acc(0.0, 0.0);
      Lf[j][0] = acc;
      for (int i = 1; i < N; ++i) {
        acc = rd.emuh[j] * acc + rd.pL[j][i - 1];
        Lf[j][i] = acc;
      }
    }
    // Above-rho cumulants, backward, closed by the far-field model.
    std::vector<std::vector<cplx>> Rf(m, std::vector<cplx>(N));
    for (int j = 0; j < m; ++j) {
      cplx acc(0.0, 0.0);
      for (int q = 0; q < static_cast<int>(phases_.size()); ++q) {
        const cplx zq = rd.fmodel.phase[q];
        const cplx pre = std::exp(zq * T);
        const cplx delta = cplx(0.0, -1.0) * (zq + rd.mu[j]);
        for (int jj = 0; jj < rd.fmodel.terms(); ++jj) {
          const cplx b = rd.fmodel.beta[q][jj];
          if (b == cplx(0.0, 0.0)) continue;
          acc += b * pre * tail_osc_anchored(delta, T, rd.fmodel.e_min + jj, cfg_.quad_tol);
        }
      }
      Rf[j][N - 1] = acc;
      for (int i = N - 2; i >= 0; --i) Rf[j][i] = rd.pR[j][i] + rd.emuh[j] * Rf[j][i + 1];
    }
    // Subtracted marginal cumulants (phase anchored at the node).
    std::vector<std::vector<cplx>> Sf(rd.marg.size());
    for (size_t q = 0; q < rd.marg.size(); ++q) {
      Sf[q].assign(N, cplx(0.0, 0.0));
      const cplx mu = rd.mu[rd.marg[q]];
      cplx acc(0.0, 0.0);
      for (int q2 = 0; q2 < static_cast<int>(phases_.size()); ++q2) {
        const cplx zq = rd.fmodel.phase[q2];
        const cplx pre = std::exp(zq * T);
        const cplx delta = cplx(0.0, -1.0) * (zq - mu);
        for (int jj = 0; jj < rd.fmodel.terms(); ++jj) {
          const cplx b = rd.fmodel.beta[q2][jj];
          if (b == cplx(0.0, 0.0)) continue;
          acc += b * pre * tail_osc_anchored(delta, T, rd.fmodel.e_min + jj, cfg_.quad_tol);
        }
      }
      Sf[q][N - 1] = acc;
      for (int i = N - 2; i >= 0; --i) Sf[q][i] = rd.pS[q][i] + rd.emuhS[q] * Sf[q][i + 1];
    }

    // Which modes are marginal (index into Sf), -1 otherwise.
    std::vector<int> marg_of(m, -1);
    for (size_t q = 0; q < rd.marg.size(); ++q) marg_of[rd.marg[q]] = static_cast<int>(q);

    std::vector<std::vector<cplx>> mupow(m, std::vector<cplx>(twom));
    for (int j = 0; j < m; ++j) {
      cplx mp(1.0, 0.0);
      for (int k = 0; k < twom; ++k) {
        mupow[j][k] = mp;
        mp *= rd.mu[j];
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int k = 0; k < twom; ++k) {
        cplx acc(0.0, 0.0);
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        for (int j = 0; j < m; ++j) {
          const int q = marg_of[j];
          const cplx body = (rd.corrected && q >= 0) ? (sgn * Rf[j][i] - Sf[q][i])
                                                     : (Lf[j][i] + sgn * Rf[j][i]);
          acc += rd.a[j] * mupow[j][k] * body;
        }
        fn->jets_[k][i] = acc;
      }
      fn->jets_[twom][i] = rd.F[i] - rd.cst * fn->jets_[0][i];
      fn->jets_[twom + 1][i] = rd.Fp[i] - rd.cst * fn->jets_[1][i];
    }

    fn->model_ = propagate_model(rd.fmodel, *rd.K, rd.corrected);

    // Seam check between grid values and the far-field model, taken over the
    // outer stretch where the model is actually consumed.  Deeper inside the
    // grid the solution still carries the kernel's own transient mode, which
    // decays faster than the marginal phases and is deliberately not part of
    // the model.
    double overlap = 0.0;
    for (double frac : {0.1, 0.2, 0.3}) {
      const int idx = std::clamp(N - 1 - static_cast<int>(std::lround(frac * cfg_.tail_margin / h)),
                                 0, N - 1);
      const double rho = G.node(idx);
      if (rho <= cl.hi()) continue;
      const cplx gv = fn->jets_[0][idx];
      const cplx mv = fn->model_.eval(rho);
      overlap = std::max(overlap, std::abs(gv - mv) / (std::abs(gv) + 1e-300));
    }
    fn->overlap_ = overlap;

    levels_[ell][rd.p] = std::move(fn);
  }
}

void FormalSolution::solve_to(int ell) {
  if (ell > capacity_)
    throw std::invalid_argument("solver: requested level exceeds the grid capacity");
  for (int l = solved_ell_ + 1; l <= ell; ++l) {
    levels_.emplace_back();
    levels_[l].resize(l + 1);
    std::vector<std::vector<RhsTerm>> terms;
    std::vector<int> ids;
    for (int p = 1; p <= l; ++p) {
      terms.push_back(build_terms(l, p));
      ids.push_back(p);
    }
    if (!ids.empty()) solve_rows(l, terms, ids);
    solve_rows(l, {build_terms(l, 0)}, {0});
    solved_ell_ = l;
  }
}

// ---- residual check -----------------------------------------------------------------

double FormalSolution::weak_residual(int ell, int p, const BumpSpec& phi, double tol) const {
  const LevelFn& g = level(ell, p);
  const double cst = kernel(p).op().const_d;
  const int twom = 2 * params_.m;
  const auto terms = rhs_terms(ell, p);
  const ChiCutoff& cl = chi(ell);
  auto phik = [&phi](int k, double rho) {
    return bump_eval(k, (rho - phi.center) / phi.width) * std::pow(phi.width, -k);
  };
  auto lhs = [&](double rho) { return g.eval(0, rho) * (phik(twom, rho) + cst * phik(0, rho)); };
  auto rhs = [&](double rho) {
    const double c = cl.eval(0, rho);
    return c == 0.0 ? cplx(0.0, 0.0) : c * eval_terms(terms, rho) * phik(0, rho);
  };
  const double a = phi.center - phi.width, b = phi.center + phi.width;
  QuadResult qa = integrate(lhs, a, b, 0.0, tol, 4000);
  QuadResult qb = integrate(rhs, a, b, 0.0, tol, 4000);
  QuadResult qs = integrate([&](double rho) { return cplx(std::abs(rhs(rho)), 0.0); }, a, b, 0.0,
                            tol, 4000);
  if (!qa.converged || !qb.converged || !qs.converged)
    throw std::runtime_error("solver: residual quadrature did not converge");
  // Natural comparison scale: the forcing mass through the bump, or the
  // solution values against the test derivatives when the forcing is absent.
  double supg = 0.0;
  for (int s = 0; s <= 16; ++s)
    supg = std::max(supg, std::abs(g.eval(0, a + (b - a) * s / 16.0)));
  QuadResult qt = integrate(
      [&](double rho) { return cplx(std::abs(phik(twom, rho)) + std::abs(cst * phik(0, rho)), 0.0); },
      a, b, 0.0, tol, 4000);
  const double scale = std::max({qs.value.real(), supg * qt.value.real(), 1e-280});
  return std::abs(qa.value - qb.value) / scale;
}

// ---- evaluation ----------------------------------------------------------------------

cplx FormalSolution::u_level(int ell, double t, double rho) const {
  if (ell < 0 || ell > solved_ell_) throw std::out_of_range("solver: level not solved");
  cplx acc(0.0, 0.0);
  for (int p = 0; p <= ell; ++p) acc += levels_[ell][p]->eval(0, rho) * mode(p).fn.eval_double(t);
  return acc;
}

cplx FormalSolution::assemble_d(AssembleMode mode, double t, double rho) const {
  cplx acc(0.0, 0.0);
  for (int ell = 0; ell <= solved_ell_; ++ell) {
    if (mode == AssembleMode::tilde) {
      if (2.0 * r_omega_ * (ell + 1) >= rho) break;  // this and all later gates vanish
      const double w = omega(ell).eval(0, rho);
      if (w == 0.0) continue;
      acc += w * u_level(ell, t, rho);
    } else {
      acc += u_level(ell, t, rho);
    }
  }
  return acc;
}

ComplexHP FormalSolution::assemble(AssembleMode mode, double t, double rho) const {
  const cplx v = assemble_d(mode, t, rho);
  return ComplexHP(v.real(), v.imag());
}

// ---- growth certificate ----------------------------------------------------------------

GrowthReport FormalSolution::growth_certificate(int k_max) const {
  const int m = params_.m;
  const int twom = 2 * m;
  if (k_max < 0) k_max = twom;
  k_max = std::min(k_max, twom + 1);
  if (solved_ell_ < 3)
    throw std::logic_error("solver: growth certificate needs at least four levels");
  const Grid& G = *grid_;
  const double c0 = params_.c0.to_double();

  GrowthReport rep;
  rep.ell_max = solved_ell_;
  rep.k_max = k_max;
  rep.c0 = c0;

  std::vector<double> expw(G.n), rpow(G.n);
  for (int i = 0; i < G.n; ++i) expw[i] = std::exp(c0 * G.node(i));

  rep.S.assign(solved_ell_ + 1, {});
  rep.level_max.assign(solved_ell_ + 1, 0.0);
  double c_level = 0.0;
  double k_scaling = 0.0;
  for (int ell = 0; ell <= solved_ell_; ++ell) {
    for (int i = 0; i < G.n; ++i) rpow[i] = std::pow(G.node(i), ell);
    rep.S[ell].assign(ell + 1, std::vector<double>(k_max + 1, 0.0));
    for (int p = 0; p <= ell; ++p) {
      const LevelFn& g = *levels_[ell][p];
      for (int k = 0; k <= k_max; ++k) {
        double sup = 0.0;
        const auto& jk = g.jet(k);
        for (int i = 0; i < G.n; ++i)
          sup = std::max(sup, std::abs(jk[i]) * rpow[i] * expw[i]);
        const double norm =
            std::pow(ell + 1.0, ell * (1.0 - 1.0 / twom) + static_cast<double>(k) / twom);
        const double S = sup / norm;
        rep.S[ell][p][k] = S;
        rep.level_max[ell] = std::max(rep.level_max[ell], S);
        const double expo = ell + 1.0 + std::max(0.0, static_cast<double>(k) / twom - 1.0);
        if (S > 0.0) c_level = std::max(c_level, std::pow(S, 1.0 / expo));
        if (!std::isfinite(S)) rep.decay_ok = false;
      }
      if (k_max >= twom && rep.S[ell][p][0] > 0.0)
        k_scaling = std::max(k_scaling, rep.S[ell][p][twom] / (rep.S[ell][p][0] * (ell + 1.0)));
    }
  }
  rep.c_level = c_level;
  rep.k_scaling = k_scaling;

  // Affine fit of log level maxima against the level index.
  {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int ell = 0; ell <= solved_ell_; ++ell) {
      if (rep.level_max[ell] <= 0.0) continue;
      X.push_back({1.0, static_cast<double>(ell)});
      y.push_back(std::log(rep.level_max[ell]));
    }
    const std::vector<double> beta = least_squares(X, y);
    rep.fit_intercept = beta[0];
    rep.fit_slope = beta[1];
    double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
      ss_res += sqr(y[i] - (beta[0] + beta[1] * X[i][1]));
      ss_tot += sqr(y[i] - mean);
    }
    rep.fit_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }

  // Sampled certificate on the assembled levels: weighted t-powers and
  // derivatives in both variables.
  {
    double tmax = 1.0;
    for (int p = 0; p <= solved_ell_; ++p)
      tmax = std::max(tmax, std::pow(mode(p).E.to_double(), 1.0 / (2.0 * params_.n + 2.0)));
    tmax *= 1.2;
    const int nt = 13;
    struct Combo {
      int alpha, beta, gamma;
    };
    const int gtop = std::min(twom, k_max);
    const std::vector<Combo> combos = {{0, 0, 0}, {0, 0, 1},   {0, 0, gtop}, {1, 1, 0},
                                       {2, 2, 1}, {4, 4, gtop}, {4, 0, 0},   {0, 4, 0}};
    // Per-mode t-derivative tables.
    std::vector<std::vector<ExpPoly>> devs(solved_ell_ + 1);
    for (int p = 0; p <= solved_ell_; ++p) {
      devs[p].push_back(mode(p).fn);
      for (int b = 1; b <= 4; ++b) devs[p].push_back(devs[p][b - 1].derivative());
    }
    rep.u_level_max.assign(solved_ell_ + 1, 0.0);
    for (int ell = 0; ell <= solved_ell_; ++ell) {
      double best = 0.0;
      for (const Combo& cb : combos) {
        const double norm = std::pow(
            ell + 1.0, ell * (1.0 - 1.0 / twom) + static_cast<double>(cb.gamma) / twom);
        double sup = 0.0;
        for (int i = 0; i < G.n; i += 16) {
          const double rho = G.node(i);
          const double wr = std::pow(rho, ell) * expw[i];
          for (int it = 0; it < nt; ++it) {
            const double t = tmax * it / (nt - 1.0);
            cplx acc(0.0, 0.0);
            for (int p = 0; p <= ell; ++p)
              acc += levels_[ell][p]->jet(cb.gamma)[i] * devs[p][cb.beta].eval_double(t);
            sup = std::max(sup, std::abs(acc) * std::pow(t, cb.alpha) * wr);
          }
        }
        best = std::max(best, sup / norm);
      }
      rep.u_level_max[ell] = best;
      if (best > 0.0) rep.c_u = std::max(rep.c_u, std::pow(best, 1.0 / (ell + 1.0)));
      if (!std::isfinite(best)) rep.decay_ok = false;
    }
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int ell = 0; ell <= solved_ell_; ++ell) {
      if (rep.u_level_max[ell] <= 0.0) continue;
      X.push_back({1.0, static_cast<double>(ell)});
      y.push_back(std::log(rep.u_level_max[ell]));
    }
    const std::vector<double> beta = least_squares(X, y);
    double ss_res = 0.0, ss_tot = 0.0, mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    for (size_t i = 0; i < y.size(); ++i) {
      ss_res += sqr(y[i] - (beta[0] + beta[1] * X[i][1]));
      ss_tot += sqr(y[i] - mean);
    }
    rep.u_fit_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return rep;
}

// ---- checkpointing ------------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'G', 'F', 'R', 'G', 'S', 'O', 'L', 'V'};

nlohmann::ordered_json model_to_json(const AsymModel& m) {
  nlohmann::ordered_json j;
  j["e_min"] = m.e_min;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& qrow : m.beta) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const cplx& b : qrow) row.push_back({b.real(), b.imag()});
    rows.push_back(std::move(row));
  }
  j["beta"] = std::move(rows);
  return j;
}

AsymModel model_from_json(const nlohmann::ordered_json& j, const std::vector<cplx>& phases) {
  const auto& rows = j.at("beta");
  const int terms = rows.empty() ? 0 : static_cast<int>(rows[0].size());
  AsymModel m = AsymModel::zero(phases, j.at("e_min").get<int>(), terms);
  for (size_t q = 0; q < rows.size(); ++q)
    for (int i = 0; i < terms; ++i)
      m.beta[q][i] = cplx(rows[q][i][0].get<double>(), rows[q][i][1].get<double>());
  return m;
}
}  // namespace

void FormalSolution::save(const std::string& path) const {
  nlohmann::ordered_json hdr;
  hdr["format"] = 1;
  hdr["n"] = params_.n;
  hdr["m"] = params_.m;
  hdr["solved_ell"] = solved_ell_;
  hdr["config"] = {{"ell_max", cfg_.ell_max},
                   {"grid_capacity_ell", cfg_.grid_capacity_ell},
                   {"r1", cfg_.r1},
                   {"r_omega", cfg_.r_omega},
                   {"h", cfg_.h},
                   {"rho_lo", cfg_.rho_lo},
                   {"tail_margin", cfg_.tail_margin},
                   {"model_terms", cfg_.model_terms},
                   {"quad_tol", cfg_.quad_tol}};
  hdr["grid"] = {{"lo", grid_->lo}, {"h", grid_->h}, {"n", grid_->n}};
  nlohmann::ordered_json lv = nlohmann::ordered_json::array();
  for (int ell = 0; ell <= solved_ell_; ++ell)
    for (int p = 0; p <= ell; ++p) {
      const LevelFn& g = *levels_[ell][p];
      nlohmann::ordered_json e;
      e["ell"] = ell;
      e["p"] = p;
      e["analytic"] = g.analytic_seed();
      e["seed_mu"] = {g.seed_mu_.real(), g.seed_mu_.imag()};
      e["overlap"] = g.model_overlap();
      e["model"] = model_to_json(g.model());
      lv.push_back(std::move(e));
    }
  hdr["levels"] = std::move(lv);
  const std::string hs = hdr.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("solver: cannot open checkpoint for writing");
  out.write(kMagic, 8);
  const uint64_t len = hs.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  // Raw jets in level-major order, native doubles.
  for (int ell = 0; ell <= solved_ell_; ++ell)
    for (int p = 0; p <= ell; ++p) {
      const LevelFn& g = *levels_[ell][p];
      for (int k = 0; k <= g.jet_depth(); ++k)
        out.write(reinterpret_cast<const char*>(g.jet(k).data()),
                  static_cast<std::streamsize>(g.jet(k).size() * sizeof(cplx)));
    }
  if (!out) throw std::runtime_error("solver: checkpoint write failed");
}

FormalSolution FormalSolution::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("solver: cannot open checkpoint");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("solver: not a checkpoint file");
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("solver: truncated checkpoint header");
  const nlohmann::ordered_json hdr = nlohmann::ordered_json::parse(hs);
  if (hdr.at("format").get<int>() != 1)
    throw std::runtime_error("solver: unsupported checkpoint format");

  FormalSolution fs;
  fs.params_ = derive_params(hdr.at("n").get<int>(), hdr.at("m").get<int>());
  const auto& jc = hdr.at("config");
  fs.cfg_.ell_max = jc.at("ell_max").get<int>();
  fs.cfg_.grid_capacity_ell = jc.at("grid_capacity_ell").get<int>();
  fs.cfg_.r1 = jc.at("r1").get<double>();
  fs.cfg_.r_omega = jc.at("r_omega").get<double>();
  fs.cfg_.h = jc.at("h").get<double>();
  fs.cfg_.rho_lo = jc.at("rho_lo").get<double>();
  fs.cfg_.tail_margin = jc.at("tail_margin").get<double>();
  fs.cfg_.model_terms = jc.at("model_terms").get<int>();
  fs.cfg_.quad_tol = jc.at("quad_tol").get<double>();
  fs.init_derived();
  if (fs.grid_->n != hdr.at("grid").at("n").get<int>() ||
      fs.grid_->lo != hdr.at("grid").at("lo").get<double>() ||
      fs.grid_->h != hdr.at("grid").at("h").get<double>())
    throw std::runtime_error("solver: checkpoint grid mismatch");

  const int solved = hdr.at("solved_ell").get<int>();
  const int depth = 2 * fs.params_.m + 1;
  fs.levels_.clear();
  size_t cursor = 0;
  const auto& lv = hdr.at("levels");
  for (int ell = 0; ell <= solved; ++ell) {
    fs.levels_.emplace_back();
    fs.levels_[ell].resize(ell + 1);
    for (int p = 0; p <= ell; ++p) {
      const auto& e = lv.at(cursor++);
      if (e.at("ell").get<int>() != ell || e.at("p").get<int>() != p)
        throw std::runtime_error("solver: checkpoint level order mismatch");
      auto fn = std::make_unique<LevelFn>();
      fn->ell_ = ell;
      fn->p_ = p;
      fn->depth_ = depth;
      fn->analytic_ = e.at("analytic").get<bool>();
      fn->seed_mu_ = cplx(e.at("seed_mu")[0].get<double>(), e.at("seed_mu")[1].get<double>());
      fn->overlap_ = e.at("overlap").get<double>();
      fn->grid_ = fs.grid_;
      fn->model_ = model_from_json(e.at("model"), fs.phases_);
      fn->jets_.assign(depth + 1, std::vector<cplx>(fs.grid_->n));
      for (int k = 0; k <= depth; ++k)
        in.read(reinterpret_cast<char*>(fn->jets_[k].data()),
                static_cast<std::streamsize>(fn->jets_[k].size() * sizeof(cplx)));
      if (!in) throw std::runtime_error("solver: truncated checkpoint data");
      fs.levels_[ell][p] = std::move(fn);
    }
  }
  fs.solved_ell_ = solved;
  return fs;
}

}  // namespace gforge
