// SPDX-License-Identifier: Apache-2.0

#include "gforge/tables.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <tuple>

#include "gforge/spectral.hpp"
#include "json.hpp"

namespace gforge {

namespace {
const BigRational& zero_rational() {
  static const BigRational z;
  return z;
}
}  // namespace

// ============================================================================
// DeltaTable
// ============================================================================

DeltaTable::DeltaTable(int n, int k_max, int i_max)
    : n_(n), k_max_(k_max), i_max_(i_max) {
  if (n < 0 || k_max < 0 || i_max < 0) throw std::invalid_argument("DeltaTable: negative size");
  const BigRational np1(n + 1);
  // 1 + alpha with alpha = -1/(2n+2)
  const BigRational one_plus_alpha(2 * n + 1, 2 * n + 2);

  ent_.assign(k_max_ + 1, {});
  for (int k = 0; k <= k_max_; ++k) {
    ent_[k].assign(i_max_ + 1, {});
    ent_[k][0].assign(1, BigRational(1));
    for (int i = 1; i <= i_max_; ++i) {
      ent_[k][i].assign(2 * i + 1, BigRational());
      for (int j = -i; j <= i; ++j) {
        if (k + j < 0) continue;  // no mode below the ground state
        BigRational acc = BigRational(k + j) * get(k, i - 1, j - 1);
        acc -= one_plus_alpha * get(k, i - 1, j);
        acc -= (BigRational(k + j + 1) + /* alpha */ BigRational(-1, 2 * n + 2)) *
               get(k, i - 1, j + 1);
        ent_[k][i][j + i] = np1 * acc;
      }
    }
  }

  // Fit the geometric growth envelope |delta_j^{k,i}| <= C^i (k+i)!/k!.
  double c = 0;
  for (int k = 0; k <= k_max_; ++k) {
    for (int i = 1; i <= i_max_; ++i) {
      BigRational fall = pochhammer(BigRational(k + i), static_cast<unsigned>(i));
      for (int j = -i; j <= i; ++j) {
        const BigRational& v = get(k, i, j);
        if (v.is_zero()) continue;
        double ratio = (v.abs() / fall).to_double();
        c = std::max(c, std::pow(ratio, 1.0 / i));
      }
    }
  }
  growth_c_ = c;
}

const BigRational& DeltaTable::get(int k, int i, int j) const {
  if (k < 0 || k > k_max_ || i < 0 || i > i_max_) throw std::out_of_range("DeltaTable::get");
  if (j < -i || j > i || k + j < 0) return zero_rational();
  return ent_[k][i][j + i];
}

std::string DeltaTable::to_json() const {
  nlohmann::ordered_json out;
  out["table"] = "delta";
  out["n"] = n_;
  out["k_max"] = k_max_;
  out["i_max"] = i_max_;
  out["growth_constant"] = growth_c_;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (int k = 0; k <= k_max_; ++k)
    for (int i = 0; i <= i_max_; ++i)
      for (int j = -i; j <= i; ++j) {
        const BigRational& v = get(k, i, j);
        if (v.is_zero()) continue;
        rows.push_back({{"k", k}, {"i", i}, {"j", j}, {"value", v.str()}});
      }
  out["entries"] = std::move(rows);
  return out.dump(2);
}

const DeltaTable& delta_table(int n, int k_max, int i_max) {
  static std::map<std::tuple<int, int, int>, std::unique_ptr<DeltaTable>> cache;
  auto key = std::make_tuple(n, k_max, i_max);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<DeltaTable>(n, k_max, i_max)).first;
  return *it->second;
}

std::map<int, BigRational> delta_oracle(int n, int k, int i) {
  if (n < 0 || k < 0 || i < 0) throw std::invalid_argument("delta_oracle: negative argument");
  ExpPoly cur = eigenfunction(false, k, n).fn;
  for (int s = 0; s < i; ++s) cur = cur.t_derivative();

  // Triangular solve against the even-family basis, highest degree first.
  std::map<int, BigRational> out;
  Poly rem = cur.p;
  const int step = 2 * n + 2;
  for (int q = k + i; q >= std::max(0, k - i); --q) {
    Poly basis = eigenfunction(false, q, n).fn.p;
    const int dq = q * step;
    BigRational c;
    if (rem.degree() >= dq) c = rem.coeff(static_cast<unsigned>(dq)) / basis.coeff(static_cast<unsigned>(dq));
    if (!c.is_zero()) rem = rem - basis * c;
    out[q - k] = c;
  }
  if (rem.degree() >= 0)
    throw std::logic_error("delta_oracle: expansion leaves the eigenfunction span");
  return out;
}

// ============================================================================
// b/d tables
// ============================================================================

BDTables bd_tables(int p_max, int nu_max) {
  if (p_max < 1 || nu_max < 1) throw std::invalid_argument("bd_tables: sizes must be >= 1");
  BDTables t;
  t.p_max = p_max;
  t.nu_max = nu_max;

  t.b.assign(p_max + 1, {});
  t.b[1] = {BigRational(), BigRational(1)};
  for (int p = 2; p <= p_max; ++p) {
    t.b[p].assign(p + 1, BigRational());
    for (int l = 1; l <= p; ++l) {
      BigRational v = (l <= p - 1) ? t.b[p - 1][l] : BigRational();
      if (l >= 2) v += BigRational(p - 1) * t.b[p - 1][l - 1];
      t.b[p][l] = v;
    }
  }

  t.d.assign(nu_max + 1, {});
  t.d[1] = {BigRational(), BigRational(1)};
  for (int nu = 2; nu <= nu_max; ++nu) {
    t.d[nu].assign(nu + 1, BigRational());
    for (int i = 1; i <= nu; ++i) {
      BigRational v = (i <= nu - 1) ? t.d[nu - 1][i] : BigRational();
      if (i >= 2) v += BigRational(nu + 1 - i) * t.d[nu - 1][i - 1];
      t.d[nu][i] = v;
    }
  }
  return t;
}

std::string BDTables::to_json() const {
  nlohmann::ordered_json out;
  out["table"] = "bd";
  out["p_max"] = p_max;
  out["nu_max"] = nu_max;
  nlohmann::ordered_json bj = nlohmann::ordered_json::array();
  for (int p = 1; p <= p_max; ++p)
    for (int l = 1; l <= p; ++l) bj.push_back({{"p", p}, {"l", l}, {"value", b[p][l].str()}});
  nlohmann::ordered_json dj = nlohmann::ordered_json::array();
  for (int nu = 1; nu <= nu_max; ++nu)
    for (int i = 1; i <= nu; ++i) dj.push_back({{"nu", nu}, {"i", i}, {"value", d[nu][i].str()}});
  out["b"] = std::move(bj);
  out["d"] = std::move(dj);
  return out.dump(2);
}

// ============================================================================
// transport polynomials
// ============================================================================

const BigRational& PTable::coeff(int i, int j) const {
  if (i < 0 || i > p || j < 0) throw std::out_of_range("PTable::coeff");
  if (j >= static_cast<int>(rows[i].size())) return zero_rational();
  return rows[i][j];
}

BigRational PTable::eval_row(int i, const BigRational& a) const {
  BigRational acc;
  for (int j = static_cast<int>(rows[i].size()) - 1; j >= 0; --j) acc = acc * a + rows[i][j];
  return acc;
}

std::string PTable::to_json() const {
  nlohmann::ordered_json out;
  out["table"] = "transport";
  out["p"] = p;
  out["theta"] = theta.str();
  out["gamma"] = gamma.str();
  out["q"] = q.str();
  out["f"] = f.str();
  nlohmann::ordered_json rj = nlohmann::ordered_json::array();
  for (int i = 0; i <= p; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const auto& v : rows[i]) row.push_back(v.str());
    rj.push_back(std::move(row));
  }
  out["rows"] = std::move(rj);
  return out.dump(2);
}

PTable p_coeffs(int p, const BigRational& theta, const BigRational& gamma,
                const BigRational& q, const BigRational& f) {
  if (p < 0) throw std::invalid_argument("p_coeffs: negative order");
  PTable t;
  t.p = p;
  t.theta = theta;
  t.gamma = gamma;
  t.q = q;
  t.f = f;

  // Expand prod_{j=0}^{p-1} (c0 - j theta + gamma T + D) over Q[T, D].
  const BigRational c0 = BigRational(1) - theta + q + gamma * f;
  std::vector<std::vector<BigRational>> c(p + 1, std::vector<BigRational>(p + 1));
  c[0][0] = BigRational(1);
  for (int j = 0; j < p; ++j) {
    const BigRational cj = c0 - theta * BigRational(j);
    std::vector<std::vector<BigRational>> nx(p + 1, std::vector<BigRational>(p + 1));
    for (int nu = 0; nu <= j; ++nu)
      for (int mu = 0; nu + mu <= j; ++mu) {
        if (c[nu][mu].is_zero()) continue;
        nx[nu][mu] += cj * c[nu][mu];
        nx[nu + 1][mu] += gamma * c[nu][mu];
        nx[nu][mu + 1] += c[nu][mu];
      }
    c = std::move(nx);
  }

  // Rewrite powers of D in the falling-factorial basis: D^mu = sum_l S(mu, l) (D)_l,
  // so that (D)_l acts on functions of rho as rho^l d^l/drho^l.
  std::vector<std::vector<BigRational>> a(p + 1, std::vector<BigRational>(p + 1));
  for (int nu = 0; nu <= p; ++nu)
    for (int mu = 0; mu + nu <= p; ++mu) {
      if (c[nu][mu].is_zero()) continue;
      for (int l = 0; l <= mu; ++l) {
        BigRational s2 = stirling2(static_cast<unsigned>(mu), static_cast<unsigned>(l));
        if (!s2.is_zero()) a[nu][l] += c[nu][mu] * s2;
      }
    }

  t.rows.assign(p + 1, {});
  for (int i = 0; i <= p; ++i) {
    t.rows[i].assign(i + 1, BigRational());
    for (int j = 0; j <= p; ++j) {
      const BigRational& v = a[j][p - i];
      if (v.is_zero()) continue;
      if (j > i) throw std::logic_error("p_coeffs: coefficient outside the triangular band");
      t.rows[i][j] = v;
    }
  }
  return t;
}

POracleReport p_oracle(const PTable& t,
                       const std::vector<std::pair<BigRational, BigRational>>& monomials) {
  POracleReport rep;
  for (const auto& [a, b] : monomials) {
    // Left side: p applications of rho^(-theta)(1 - theta + rho d/drho) to the
    // monomial rho^q t^(f+a) rho^b, each a scalar multiply and exponent shift.
    BigRational lhs(1);
    const BigRational base = BigRational(1) - t.theta + t.q + t.gamma * (t.f + a) + b;
    for (int j = 0; j < t.p; ++j) lhs *= base - t.theta * BigRational(j);

    // Right side: tabulated rows, with T acting on t^a as multiplication by a
    // and d^k/drho^k acting on rho^b as the falling factorial (b)_k.
    BigRational rhs;
    for (int i = 0; i <= t.p; ++i)
      rhs += t.eval_row(i, a) * pochhammer(b, static_cast<unsigned>(t.p - i));

    POracleReport::Item item{a, b, lhs, rhs, lhs == rhs};
    if (!item.match) rep.pass = false;
    rep.items.push_back(std::move(item));
  }
  return rep;
}

// ============================================================================
// specialization to the model operator
// ============================================================================

const BigRational& SiTables::coeff(int i, int j) const {
  if (i < 0 || i >= static_cast<int>(s.size()) || j < 0) throw std::out_of_range("SiTables::coeff");
  if (j >= static_cast<int>(s[i].size())) return zero_rational();
  return s[i][j];
}

std::string SiTables::to_json() const {
  nlohmann::ordered_json out;
  out["table"] = "transport_specialized";
  out["m"] = m;
  nlohmann::ordered_json rj = nlohmann::ordered_json::array();
  for (const auto& row : s) {
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (const auto& v : row) r.push_back(v.str());
    rj.push_back(std::move(r));
  }
  out["rows"] = std::move(rj);
  return out.dump(2);
}

SiTables si_tables(const Params& params) {
  const int m = params.m;
  const int twom = 2 * m;
  const BigRational fexp(2 * params.n);
  PTable fam1 = p_coeffs(twom, params.theta, params.gamma, params.q1, fexp);
  PTable fam2 = p_coeffs(twom - 1, params.theta, params.gamma, params.q2, fexp);
  const BigRational mtheta = BigRational(m) * params.theta;

  SiTables st;
  st.m = m;
  st.s.assign(twom + 1, {});
  for (int i = 0; i <= twom; ++i) {
    st.s[i].assign(i + 1, BigRational());
    for (int j = 0; j <= i; ++j) {
      BigRational v = fam1.coeff(i, j);
      if (i >= 1 && j <= i - 1) v -= mtheta * fam2.coeff(i - 1, j);
      st.s[i][j] = v;
    }
  }
  return st;
}

BigRational transport_weight(const SiTables& st, const DeltaTable& dt, int i, int p1, int d) {
  BigRational acc;
  for (int j = std::abs(d); j <= i; ++j) {
    const BigRational& sij = st.coeff(i, j);
    if (sij.is_zero()) continue;
    acc += sij * dt.get(p1, j, d);
  }
  return acc;
}

// ============================================================================
// operator action on expansions
// ============================================================================

std::map<int, std::function<std::complex<double>(double)>> apply_Pi(
    int i, const std::map<int, DerivFn>& expansion, const Params& params,
    const DeltaTable& dt, const SiTables& st) {
  const int twom = 2 * params.m;
  if (i < 0 || i > twom) throw std::invalid_argument("apply_Pi: order outside [0, 2m]");
  std::map<int, std::function<std::complex<double>(double)>> out;

  if (i == 0) {
    for (const auto& [p, fn] : expansion) {
      // Diagonal block: d^(2m)/drho^(2m) + E_p / kappa.
      const double cst = (eigenvalue(params.n, p, false) / params.kappa).to_double();
      DerivFn g = fn;
      out[p] = [g, cst, twom](double rho) { return g(twom, rho) + cst * g(0, rho); };
    }
    return out;
  }

  const int ord = twom - i;
  std::map<int, std::vector<std::pair<double, DerivFn>>> acc;
  for (const auto& [p1, fn] : expansion) {
    for (int d = -i; d <= i; ++d) {
      const int nu = p1 + d;
      if (nu < 0) continue;
      BigRational w = transport_weight(st, dt, i, p1, d);
      if (w.is_zero()) continue;  // exact-zero weights drop out of the band
      acc[nu].emplace_back(w.to_double(), fn);
    }
  }
  for (auto& [nu, terms] : acc) {
    auto t = std::move(terms);
    out[nu] = [t, ord](double rho) {
      std::complex<double> s = 0;
      for (const auto& [w, fn] : t) s += w * fn(ord, rho);
      return s;
    };
  }
  return out;
}

}  // namespace gforge
