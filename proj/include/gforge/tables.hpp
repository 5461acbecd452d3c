// SPDX-License-Identifier: Apache-2.0
//
// Exact coefficient tables for the transport hierarchy.
//
// Three ingredients are tabulated: the transition coefficients delta of
// t d/dt acting on the eigenfunction ladder, the combinatorial tables b/d
// relating powers of rho d/drho to falling factorials, and the transport
// polynomials p_{i,j} produced by expanding powers of the descent operator
// B = rho^(-theta) (1 - theta + rho d/drho).  Each table has an independent
// brute-force oracle so no entry is ever trusted on transcription alone.

#pragma once

#include <complex>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gforge/params.hpp"
#include "gforge/rational.hpp"

namespace gforge {

// ---- delta: (t d/dt)^i v_k = sum_j delta_j^{k,i} v_{k+j} -------------------

class DeltaTable {
 public:
  DeltaTable(int n, int k_max, int i_max);

  int n() const { return n_; }
  int k_max() const { return k_max_; }
  int i_max() const { return i_max_; }

  // delta_j^{k,i}; exact zero outside the band |j| <= i or when k+j < 0
  // (there is no eigenfunction below the ground state).
  const BigRational& get(int k, int i, int j) const;

  // Smallest C with max_j |delta_j^{k,i}| k!/(k+i)! <= C^i over the table.
  double growth_constant() const { return growth_c_; }

  std::string to_json() const;

 private:
  int n_, k_max_, i_max_;
  double growth_c_ = 0;
  std::vector<std::vector<std::vector<BigRational>>> ent_;  // [k][i][j+i]
};

// Memoized accessor (the solver re-reads tables heavily).
const DeltaTable& delta_table(int n, int k_max, int i_max);

// Expands (t d/dt)^i v_k exactly in the ring and solves the triangular
// system against the eigenfunction basis; map key is the offset j.  Throws
// if the result fails to lie in the expected span.
std::map<int, BigRational> delta_oracle(int n, int k, int i);

// ---- b/d tables -------------------------------------------------------------

struct BDTables {
  int p_max = 0;
  int nu_max = 0;
  // b[p][l], 1 <= l <= p; d[nu][i], 1 <= i <= nu (index 0 unused).
  std::vector<std::vector<BigRational>> b;
  std::vector<std::vector<BigRational>> d;
  std::string to_json() const;
};

BDTables bd_tables(int p_max, int nu_max);

// ---- transport polynomials --------------------------------------------------

// For B^p applied to rho^q [t^f u]:
//   B^p rho^q [t^f u] = rho^(q + p(1-theta)) t^f sum_i rho^(-i) P_i(T) d^(p-i)/d rho^(p-i) u,
// with T = t d/dt.  rows[i][j] is the coefficient of T^j in P_i.
struct PTable {
  int p = 0;
  BigRational theta, gamma, q, f;
  std::vector<std::vector<BigRational>> rows;  // rows[i], 0 <= i <= p; j <= i

  const BigRational& coeff(int i, int j) const;
  // P_i evaluated at a scalar (monomial action of T on t^a).
  BigRational eval_row(int i, const BigRational& a) const;
  std::string to_json() const;
};

// Exact expansion of the operator product prod_{j=0}^{p-1}
// (1 - theta + q + gamma f - j theta + gamma T + D) over Q[T, D], with powers
// of D rewritten in the falling-factorial basis.
PTable p_coeffs(int p, const BigRational& theta, const BigRational& gamma,
                const BigRational& q, const BigRational& f);

// Both sides of the descent identity on monomials u = t^a rho^b.
struct POracleReport {
  struct Item {
    BigRational a, b, lhs, rhs;
    bool match = false;
  };
  bool pass = true;
  std::vector<Item> items;
};

POracleReport p_oracle(const PTable& table,
                       const std::vector<std::pair<BigRational, BigRational>>& monomials);

// ---- specialization to the model operator -----------------------------------

// Transport polynomials S_i(T) of the reduced operator: the order-2m family
// at offset q1 minus m*theta times the order-(2m-1) family at offset q2,
// the latter entering one step lower in i.
struct SiTables {
  int m = 0;
  std::vector<std::vector<BigRational>> s;  // s[i][j], i = 0..2m, j <= i
  const BigRational& coeff(int i, int j) const;
  std::string to_json() const;
};

SiTables si_tables(const Params& params);

// Band weight W_i(p1, d) = sum_j S_i[j] delta_d^{p1,j}: the coefficient with
// which mode p1 feeds mode p1+d through the order-i transport row.
BigRational transport_weight(const SiTables& st, const DeltaTable& dt, int i, int p1, int d);

// ---- operator action on expansions -------------------------------------------

// A mode-coefficient handle: eval(order, rho) returns the order-th
// rho-derivative at rho.
using DerivFn = std::function<std::complex<double>(int order, double rho)>;

// Action of the order-i transport block on an expansion sum_p g_p v_p,
// returning the coefficient functions of the output expansion (common
// prefactor kappa t^(2n) stripped).  For i = 0 this is the diagonal map
// g_p -> g_p^(2m) + (-1)^m theta^(2m) E_p g_p; for i >= 1 the banded map
// with weights W_i.  Entries whose weight vanishes identically are omitted.
std::map<int, std::function<std::complex<double>(double)>> apply_Pi(
    int i, const std::map<int, DerivFn>& expansion, const Params& params,
    const DeltaTable& dt, const SiTables& st);

}  // namespace gforge
