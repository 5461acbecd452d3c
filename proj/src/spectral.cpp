// SPDX-License-Identifier: Apache-2.0

#include "gforge/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gforge {

Poly laguerre(unsigned k, const BigRational& alpha) {
  Poly lm1;                                              // L_{-1} := 0
  Poly l0(std::vector<BigRational>{1});                  // L_0 = 1
  if (k == 0) return l0;
  Poly l1(std::vector<BigRational>{alpha + 1, -1});      // L_1 = 1 + alpha - s
  lm1 = l0;
  l0 = l1;
  for (unsigned j = 1; j < k; ++j) {
    // (j+1) L_{j+1} = (2j+1+alpha-s) L_j - (j+alpha) L_{j-1}
    BigRational jr(static_cast<long>(j));
    Poly a = l0 * (BigRational(2 * static_cast<long>(j) + 1) + alpha) - l0.shift_mul(1);
    Poly b = lm1 * (jr + alpha);
    Poly next = (a - b) * BigRational(1, static_cast<long>(j) + 1);
    lm1 = l0;
    l0 = next;
  }
  return l0;
}

Poly laguerre_binomial(unsigned k, const BigRational& alpha) {
  std::vector<BigRational> c(k + 1);
  for (unsigned i = 0; i <= k; ++i) {
    BigRational term = binomial(BigRational(static_cast<long>(k)) + alpha, k - i) / factorial(i);
    c[i] = (i % 2 == 0) ? term : -term;
  }
  return Poly(std::move(c));
}

double SymValue::to_double() const {
  double base = n + 1;
  double a = -1.0 / (2 * n + 2);
  double v = 0;
  if (!coef_even.is_zero())
    v += coef_even.to_double() * std::pow(base, a) * std::tgamma(1.0 + a);
  if (!coef_odd.is_zero())
    v += coef_odd.to_double() * std::pow(base, -a) * std::tgamma(1.0 - a);
  return v;
}

void SymValue::canonicalize() {
  if (n == 0 && !coef_odd.is_zero()) {
    coef_even += coef_odd * BigRational(1, 2);
    coef_odd = BigRational(0);
  }
}

namespace {

// Closed-form norm: (f,f) = (1/2) (n+1)^beta Gamma(k+1+beta)/k! with beta the
// family's Laguerre parameter; rewritten on Gamma(1+beta).
SymValue closed_norm2(int n, int k, bool odd) {
  BigRational beta(odd ? 1 : -1, 2 * n + 2);
  BigRational rising = 1;
  for (int i = 1; i <= k; ++i) rising *= BigRational(i) + beta;
  BigRational coef = rising / (factorial(static_cast<unsigned>(k)) * BigRational(2));
  SymValue v;
  v.n = n;
  (odd ? v.coef_odd : v.coef_even) = coef;
  v.canonicalize();
  return v;
}

}  // namespace

EigenFn eigenfunction(bool odd, int k, int n) {
  if (k < 0 || n < 0) throw std::invalid_argument("eigenfunction: need k, n >= 0");
  EigenFn f;
  f.n = n;
  f.k = k;
  f.odd = odd;
  f.E = eigenvalue(n, k, odd);
  BigRational beta(odd ? 1 : -1, 2 * n + 2);
  Poly ls = laguerre(static_cast<unsigned>(k), beta);
  Poly pt = ls.subst_power(2 * n + 2, BigRational(1, n + 1));
  if (odd) pt = pt.shift_mul(1);
  f.fn = ExpPoly(n, std::move(pt));
  f.norm2 = closed_norm2(n, k, odd);
  return f;
}

ExpPoly eigen_residual(const EigenFn& f) {
  ExpPoly second = f.fn.derivative().derivative();
  ExpPoly potential = f.fn.shift_mul(2 * (2 * f.n + 1));
  ExpPoly weighted = f.fn.shift_mul(2 * f.n) * f.E;
  return (potential - second) - weighted;
}

SymValue inner_product(const EigenFn& f, const EigenFn& g) {
  if (f.n != g.n) throw std::invalid_argument("inner_product: mismatched n");
  SymValue out;
  out.n = f.n;
  if (f.odd != g.odd) return out;  // odd integrand over the full line
  int n = f.n;
  Poly prod = f.fn.p * g.fn.p;
  // Half of the full-line integral of t^(2n) P_f P_g exp(-t^(2n+2)/(n+1)):
  // only monomials of even total degree survive; each reduces to a Gamma
  // value at 1 + (2c-1)/(2n+2) with c the residue of the half-degree mod
  // (n+1).  Eigenfunction products only ever produce c in {0, 1}.
  for (int j = 0; j <= prod.degree(); ++j) {
    const BigRational& cj = prod.coeff(static_cast<unsigned>(j));
    if (cj.is_zero()) continue;
    if (j % 2 != 0) continue;
    long a = j / 2;
    long I = a / (n + 1);
    long c = a % (n + 1);
    if (c > 1)
      throw std::logic_error("inner_product: unexpected Gamma class from eigen pair");
    BigRational beta(2 * c - 1, 2 * n + 2);
    BigRational contrib = cj * BigRational(static_cast<long>(n) + 1).pow(I) / BigRational(2);
    for (long l = 1; l <= I; ++l) contrib *= BigRational(l) + beta;
    if (c == 0)
      out.coef_even += contrib;
    else
      out.coef_odd += contrib;
  }
  out.canonicalize();
  return out;
}

// ---- bound certification ----------------------------------------------------

std::vector<double> least_squares(const std::vector<std::vector<double>>& X,
                                  const std::vector<double>& y) {
  size_t p = X.empty() ? 0 : X[0].size();
  std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
  for (size_t i = 0; i < X.size(); ++i) {
    for (size_t a = 0; a < p; ++a) {
      for (size_t b = 0; b < p; ++b) A[a][b] += X[i][a] * X[i][b];
      A[a][p] += X[i][a] * y[i];
    }
  }
  // Gauss-Jordan with partial pivoting on the (small) normal equations.
  for (size_t col = 0; col < p; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < p; ++r)
      if (std::fabs(A[r][col]) > std::fabs(A[piv][col])) piv = r;
    std::swap(A[col], A[piv]);
    if (std::fabs(A[col][col]) < 1e-300)
      throw std::runtime_error("least_squares: singular normal equations");
    double d = A[col][col];
    for (size_t cc = col; cc <= p; ++cc) A[col][cc] /= d;
    for (size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      double f = A[r][col];
      if (f == 0.0) continue;
      for (size_t cc = col; cc <= p; ++cc) A[r][cc] -= f * A[col][cc];
    }
  }
  std::vector<double> beta(p);
  for (size_t i = 0; i < p; ++i) beta[i] = A[i][p];
  return beta;
}

namespace {

struct GridPoint {
  BigRational t;
  double log_t;   // log t (t = 0 handled separately)
  double w;       // t^(2n+2)/(2n+2)
};

std::vector<GridPoint> make_grid(int n, double t_hi, double turning) {
  // Built sorted by t below.
  std::vector<GridPoint> g;
  const long den = 16;
  long imax = static_cast<long>(t_hi * den) + 1;
  for (long i = 1; i <= imax; ++i) {
    BigRational t(i, den);
    double td = static_cast<double>(i) / den;
    g.push_back({t, std::log(td), std::pow(td, 2 * n + 2) / (2 * n + 2)});
  }
  // Geometric refinement near the turning point, snapped to denominator 256.
  for (int j = 1; j <= 10; ++j) {
    for (int sgn : {-1, 1}) {
      double td = turning * (1.0 + sgn * std::pow(2.0, -j));
      if (td <= 0 || td > t_hi) continue;
      long num = std::lround(td * 256);
      if (num <= 0) continue;
      BigRational t(num, 256);
      td = static_cast<double>(num) / 256;
      g.push_back({t, std::log(td), std::pow(td, 2 * n + 2) / (2 * n + 2)});
    }
  }
  std::sort(g.begin(), g.end(),
            [](const GridPoint& a, const GridPoint& b) { return a.t < b.t; });
  return g;
}

}  // namespace

BoundReport bound_suite(int k_max, int n) {
  if (k_max < 2) throw std::invalid_argument("bound_suite: k_max >= 2 required");
  const int A = 16;  // highest moment order t^a
  const int B = 16;  // highest derivative order
  BoundReport rep;
  rep.n = n;
  rep.k_max = k_max;
  rep.decay_floor = (1.0 - std::pow(0.5, 2 * n + 1)) / (2 * n + 2);

  // Pooled regression design: log M_k(a,b) against a log a, b log b, a, b,
  // with one intercept per k.
  std::vector<std::vector<double>> X;
  std::vector<double> Y;

  for (int k = 0; k <= k_max; ++k) {
    EigenFn f = eigenfunction(false, k, n);
    double Ek = f.E.to_double();
    double turning = std::pow(Ek, 1.0 / (2 * n + 2));

    // Derivative family P_b: v^(b) = P_b exp(-w).
    std::vector<Poly> pb(B + 1);
    pb[0] = f.fn.p;
    for (int b = 1; b <= B; ++b)
      pb[b] = pb[b - 1].derivative() - pb[b - 1].shift_mul(2 * n + 1);

    // Grid range: far enough that the weight dominates every tabulated
    // power and polynomial degree; verified (and extended) below.
    double t_hi = turning * 1.7 + std::pow(2.0 * A + 2.0, 1.0 / (2 * n + 2)) + 6.0;
    std::vector<GridPoint> grid;
    std::vector<std::vector<double>> logp;  // [point][b] = log |P_b(t)|
    double global_max = -1e300;
    for (int attempt = 0; attempt < 8; ++attempt) {
      grid = make_grid(n, t_hi, turning);
      logp.assign(grid.size(), {});
      global_max = -1e300;
      for (size_t i = 0; i < grid.size(); ++i) {
        logp[i].resize(B + 1, -1e300);
        for (int b = 0; b <= B; ++b) {
          BigRational v = pb[b].eval(grid[i].t);
          if (v.is_zero()) continue;
          logp[i][b] = HPFloat(v.abs()).log().to_double();
          global_max = std::max(global_max, logp[i][b] + A * grid[i].log_t - grid[i].w);
        }
      }
      // Boundary check: the largest tabulated quantity at the last grid
      // point must sit far below the global maximum.
      double edge = -1e300;
      size_t last = grid.size() - 1;
      for (int b = 0; b <= B; ++b)
        if (logp[last][b] > -1e299)
          edge = std::max(edge, logp[last][b] + A * grid[last].log_t - grid[last].w);
      if (edge < global_max - 46.0) break;
      t_hi *= 1.3;
      if (attempt == 7) rep.grid_ok = false;
    }

    // Sup tables.
    std::vector<std::vector<double>> logM(A + 1, std::vector<double>(B + 1, -1e300));
    for (size_t i = 0; i < grid.size(); ++i) {
      for (int b = 0; b <= B; ++b) {
        if (logp[i][b] < -1e299) continue;
        double base = logp[i][b] - grid[i].w;
        for (int a = 0; a <= A; ++a)
          logM[a][b] = std::max(logM[a][b], base + a * grid[i].log_t);
      }
    }
    // t = 0 contributes to the a = 0 column.
    for (int b = 0; b <= B; ++b) {
      const BigRational& c0 = pb[b].coeff(0);
      if (!c0.is_zero())
        logM[0][b] = std::max(logM[0][b], HPFloat(c0.abs()).log().to_double());
    }

    double log_norm = std::log(f.norm2.to_double());
    BoundRow row;
    row.k = k;
    row.sup_norm = std::exp(logM[0][0] - 0.5 * log_norm);
    row.sup_ratio = row.sup_norm / std::pow(Ek, 1.5 + 1.0 / (4 * n + 4));
    row.dsup_norm = std::exp(logM[0][1] - 0.5 * log_norm);
    row.dsup_ratio = row.dsup_norm / std::pow(Ek, 3.5 - 1.0 / (4 * n + 4));

    // Decay constant: fit -log|v_k(t)| = C + B t^(2n+2) beyond the turning
    // point (where the polynomial has no zeros left).
    {
      std::vector<std::vector<double>> Xd;
      std::vector<double> Yd;
      for (size_t i = 0; i < grid.size(); ++i) {
        double td = std::exp(grid[i].log_t);
        if (td < turning * 1.3 + 1.0 || logp[i][0] < -1e299) continue;
        Xd.push_back({1.0, std::pow(td, 2 * n + 2)});
        Yd.push_back(-(logp[i][0] - grid[i].w));
      }
      auto beta = least_squares(Xd, Yd);
      row.decay_B = beta[1];
    }
    rep.rows.push_back(row);

    // Pooled Gelfand-Shilov rows.
    for (int a = 0; a <= A; ++a) {
      for (int b = 0; b <= B; ++b) {
        if (a + b < 2 || logM[a][b] < -1e299) continue;
        std::vector<double> xr(4 + static_cast<size_t>(k_max) + 1, 0.0);
        xr[0] = a > 1 ? a * std::log(static_cast<double>(a)) : 0.0;
        xr[1] = b > 1 ? b * std::log(static_cast<double>(b)) : 0.0;
        xr[2] = a;
        xr[3] = b;
        xr[4 + static_cast<size_t>(k)] = 1.0;
        X.push_back(std::move(xr));
        Y.push_back(logM[a][b]);
      }
    }
  }

  auto beta = least_squares(X, Y);
  rep.gs.mu_a = beta[0];
  rep.gs.nu_b = beta[1];
  rep.gs.beta_a = beta[2];
  rep.gs.beta_b = beta[3];
  // R^2 of the pooled fit.
  double ybar = 0;
  for (double v : Y) ybar += v;
  ybar /= static_cast<double>(Y.size());
  double ss_res = 0, ss_tot = 0;
  for (size_t i = 0; i < Y.size(); ++i) {
    double pred = 0;
    for (size_t j = 0; j < beta.size(); ++j) pred += beta[j] * X[i][j];
    ss_res += (Y[i] - pred) * (Y[i] - pred);
    ss_tot += (Y[i] - ybar) * (Y[i] - ybar);
  }
  rep.gs.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return rep;
}

std::string BoundReport::to_csv() const {
  std::ostringstream os;
  os << "k,quantity,bound,ratio\n";
  os.precision(12);
  for (const auto& r : rows) {
    os << r.k << ",sup_norm," << r.sup_norm / std::max(r.sup_ratio, 1e-300) << ","
       << r.sup_ratio << "\n";
    os << r.k << ",dsup_norm," << r.dsup_norm / std::max(r.dsup_ratio, 1e-300) << ","
       << r.dsup_ratio << "\n";
    os << r.k << ",decay_B," << decay_floor << "," << r.decay_B / decay_floor << "\n";
  }
  os << "-1,gs_moment_exponent," << 1.0 / (2 * n + 2) << ","
     << gs.mu_a / (1.0 / (2 * n + 2)) << "\n";
  os << "-1,gs_derivative_exponent," << (2.0 * n + 1) / (2 * n + 2) << ","
     << gs.nu_b / ((2.0 * n + 1) / (2 * n + 2)) << "\n";
  os << "-1,gs_r2,1," << gs.r2 << "\n";
  return os.str();
}

}  // namespace gforge
