// SPDX-License-Identifier: Apache-2.0
//
// Level-by-level construction of the formal solution
//
//   u = sum_ell u_ell,   u_ell(t, rho) = sum_{p=0}^{ell} g_{ell,p}(rho) v_p(t),
//
// where each coefficient solves a constant-coefficient ODE forced by gated
// lower-level data:  Theta_p g_{ell,p} = chi_ell f_{ell,p}.  The rows with
// p >= 1 are solved by convolution with the fundamental solution; the p = 0
// row additionally subtracts the marginal homogeneous modes so its decay
// keeps pace with the hierarchy.  Everything is deterministic: fixed grids,
// fixed summation order, no threads.

#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "gforge/cutoffs.hpp"
#include "gforge/greens.hpp"
#include "gforge/interp.hpp"
#include "gforge/params.hpp"
#include "gforge/spectral.hpp"
#include "gforge/tables.hpp"

namespace gforge {

// ---- configuration and grid ---------------------------------------------------

struct SolverConfig {
  int ell_max = 6;
  // The rho-grid is sized for this many levels (0 = ell_max).  A checkpoint
  // can be extended later only within this capacity.
  int grid_capacity_ell = 0;
  double r1 = 0.0;       // inner cutoff radius; 0 = smallest admissible
  double r_omega = 0.0;  // outer cutoff radius; 0 = max(r1, 3)
  double h = 0.0;        // grid step; 0 = 0.01 for m = 1, 0.02 otherwise
  double rho_lo = 0.5;
  double tail_margin = 36.0;  // grid extent past the last cutoff band
  int model_terms = 14;       // asymptotic orders carried per far-field phase
  double quad_tol = 1e-11;    // tolerance of the analytic tail closures
};

struct Grid {
  double lo = 0.0;
  double h = 0.0;
  int n = 0;

  double hi() const { return lo + h * (n - 1); }
  double node(int i) const { return lo + h * i; }
  int panel_of(double rho) const;  // index i with rho in [node(i), node(i+1)], clamped
};

// ---- far-field model ------------------------------------------------------------

// Truncated expansion sum_q e^{z_q rho} sum_e beta_{q,e} rho^{-e} over the
// slowest (marginal) kernel phases.  Transient modes decay strictly faster
// and are not carried.  Used to close every integral that leaves the grid.
struct AsymModel {
  std::vector<std::complex<double>> phase;  // z_q, shared across the hierarchy
  int e_min = 0;
  std::vector<std::vector<std::complex<double>>> beta;  // [q][e - e_min]

  int terms() const { return beta.empty() ? 0 : static_cast<int>(beta[0].size()); }
  int e_max() const { return e_min + terms() - 1; }
  static AsymModel zero(const std::vector<std::complex<double>>& phases, int e_min, int terms);

  std::complex<double> eval(double rho) const;
  AsymModel derivative() const;  // same window; orders past e_max are dropped
  AsymModel rho_shift(int i) const;
  // this += w * other, remapping exponents into this window (excess dropped).
  void accumulate(std::complex<double> w, const AsymModel& other);
};

// g = G * F in the far field: per input term and kernel mode the convolution
// telescopes into inverse powers of (z_q -+ mu_j).  When `corrected` is set,
// the marginal modes of the kernel enter in their corrected form (homogeneous
// part removed), which gains one power of rho; the output window then starts
// one order lower.
AsymModel propagate_model(const AsymModel& f_model, const GreensFn& G, bool corrected);

// ---- one coefficient function ---------------------------------------------------

class LevelFn {
 public:
  int ell() const { return ell_; }
  int p() const { return p_; }
  int jet_depth() const { return depth_; }  // derivatives stored: 0..depth_

  // k-th derivative at rho: exponentially small zero below the grid, Hermite
  // interpolation of the stored jets inside, far-field model beyond.  The
  // seed (0,0) is analytic and evaluated in closed form everywhere.
  std::complex<double> eval(int k, double rho) const;
  const std::vector<std::complex<double>>& jet(int k) const { return jets_[k]; }
  const AsymModel& model() const { return model_; }
  // Relative mismatch between grid values and the far-field model on the
  // outer stretch of the grid; recorded at solve time.
  double model_overlap() const { return overlap_; }
  bool analytic_seed() const { return analytic_; }

 private:
  friend class FormalSolution;
  int ell_ = 0, p_ = 0, depth_ = 0;
  bool analytic_ = false;
  std::complex<double> seed_mu_{0.0, 0.0};  // exponent of the analytic seed
  std::shared_ptr<const Grid> grid_;
  std::vector<std::vector<std::complex<double>>> jets_;  // [k][node]
  AsymModel model_;
  double overlap_ = 0.0;
  mutable std::vector<AsymModel> model_derivs_;  // lazily extended
  mutable HermitePair<std::complex<double>> cache_;
  mutable int cache_panel_ = -1;
};

// ---- right-hand side structure ---------------------------------------------------

// One exact forcing contribution: weight * sigma^{-i} * g_{src_ell,p1}^{(ord)}.
// The list for a row never contains an identically vanishing weight; in
// particular the diagonal ground-mode feedback of the p = 0 row is absent
// because the seed exponent was chosen to cancel it.
struct RhsTerm {
  int i = 0;
  int src_ell = 0;
  int p1 = 0;
  int ord = 0;
  BigRational weight;
  double weight_d = 0.0;
};

// ---- growth certificate -----------------------------------------------------------

struct GrowthReport {
  int ell_max = 0;
  int k_max = 0;
  double c0 = 0.0;
  // S[ell][p][k] = sup_rho |g^(k)| rho^ell e^(c0 rho) / (ell+1)^(ell(1-1/2m)+k/2m).
  std::vector<std::vector<std::vector<double>>> S;
  std::vector<double> level_max;  // max over p, k at fixed ell
  double c_level = 0.0;           // least C with S <= C^(ell+1+(k/2m-1)_+)
  double fit_slope = 0.0;
  double fit_intercept = 0.0;
  double fit_r2 = 0.0;    // affine fit of log level_max against ell
  double k_scaling = 0.0; // max of S(ell,p,2m) / (S(ell,p,0) (ell+1))
  std::vector<double> u_level_max;  // sampled sup of weighted t/rho derivatives of u_ell
  double c_u = 0.0;
  double u_fit_r2 = 0.0;
  bool decay_ok = true;
};

// ---- the construction --------------------------------------------------------------

enum class AssembleMode { raw, tilde };

class FormalSolution {
 public:
  explicit FormalSolution(const Params& params, const SolverConfig& cfg = {});

  // Solves levels 1..ell (level 0 is seeded at construction).  Idempotent.
  void solve_to(int ell);
  int solved_ell() const { return solved_ell_; }

  const Params& params() const { return params_; }
  const SolverConfig& config() const { return cfg_; }
  const Grid& grid() const { return *grid_; }
  double r1() const { return r1_; }
  double r_omega() const { return r_omega_; }

  const LevelFn& level(int ell, int p) const;
  const ChiCutoff& chi(int ell) const;
  const OmegaCutoff& omega(int ell) const;
  const GreensFn& kernel(int p) const;
  const EigenFn& mode(int p) const;

  // Exact forcing structure of row (ell, p); empty for the seed.
  std::vector<RhsTerm> rhs_terms(int ell, int p) const;
  // f_{ell,p}(rho) assembled from the terms, and the gated version chi * f.
  std::complex<double> rhs_value(int ell, int p, double rho) const;
  std::complex<double> forced_value(int ell, int p, double rho) const;

  // Relative weak residual of Theta_p g = chi f against a test bump.
  double weak_residual(int ell, int p, const BumpSpec& phi, double tol = 1e-11) const;

  std::complex<double> u_level(int ell, double t, double rho) const;
  std::complex<double> assemble_d(AssembleMode mode, double t, double rho) const;
  ComplexHP assemble(AssembleMode mode, double t, double rho) const;

  GrowthReport growth_certificate(int k_max = -1) const;

  // Checkpointing: magic + JSON header + raw jet arrays.  A loaded solution
  // can be extended with solve_to up to the grid capacity.
  void save(const std::string& path) const;
  static FormalSolution load(const std::string& path);

 private:
  struct Row;  // scratch of one transport row during a level solve

  FormalSolution() = default;
  void init_derived();
  void seed_level0();
  std::vector<RhsTerm> build_terms(int ell, int p) const;
  AsymModel rhs_model(const std::vector<RhsTerm>& terms) const;
  void solve_rows(int ell, const std::vector<std::vector<RhsTerm>>& row_terms,
                  const std::vector<int>& row_ids);
  std::complex<double> eval_terms(const std::vector<RhsTerm>& terms, double rho) const;
  std::complex<double> eval_terms_deriv(const std::vector<RhsTerm>& terms, double rho) const;

  Params params_;
  SolverConfig cfg_;
  double r1_ = 0.0, r_omega_ = 0.0;
  int capacity_ = 0;
  std::shared_ptr<const Grid> grid_;
  std::vector<std::complex<double>> phases_;
  int solved_ell_ = -1;
  std::vector<std::vector<std::unique_ptr<LevelFn>>> levels_;  // [ell][p]
  mutable std::vector<std::unique_ptr<GreensFn>> kernels_;
  mutable std::vector<std::unique_ptr<ChiCutoff>> chis_;
  mutable std::vector<std::unique_ptr<OmegaCutoff>> omegas_;
  mutable std::vector<std::unique_ptr<EigenFn>> modes_;
  std::unique_ptr<SiTables> si_;
};

}  // namespace gforge
