// SPDX-License-Identifier: Apache-2.0
//
// Exact univariate polynomials over BigRational and the weighted ring
// P(t) exp(-t^(2n+2)/(2n+2)) that the model eigenfunctions live in.  The
// ring is closed under d/dt (the weight differentiates to -t^(2n+1) times
// itself), so spectral residuals can be computed exactly.

#pragma once

#include <string>
#include <vector>

#include "gforge/rational.hpp"

namespace gforge {

class Poly {
 public:
  Poly() = default;
  explicit Poly(std::vector<BigRational> coeffs) : c_(std::move(coeffs)) { trim(); }
  static Poly monomial(unsigned k, BigRational coef = 1) {
    std::vector<BigRational> c(k + 1);
    c[k] = std::move(coef);
    return Poly(std::move(c));
  }

  // Degree of the zero polynomial is -1.
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  const BigRational& coeff(unsigned k) const {
    static const BigRational kZero(0);
    return k < c_.size() ? c_[k] : kZero;
  }
  void set_coeff(unsigned k, BigRational v) {
    if (k >= c_.size()) c_.resize(k + 1);
    c_[k] = std::move(v);
    trim();
  }
  const std::vector<BigRational>& coeffs() const { return c_; }

  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  friend Poly operator*(const Poly& a, const Poly& b);
  Poly operator*(const BigRational& s) const;
  Poly operator-() const { return *this * BigRational(-1); }
  bool operator==(const Poly& o) const { return c_ == o.c_; }

  // Multiplication by t^k.
  Poly shift_mul(unsigned k) const;
  Poly derivative() const;
  // Substitution s -> scale * t^K, mapping a polynomial in s to one in t.
  Poly subst_power(unsigned K, const BigRational& scale) const;

  BigRational eval(const BigRational& t) const;
  double eval_double(double t) const;
  std::string str() const;

 private:
  void trim() {
    while (!c_.empty() && c_.back().is_zero()) c_.pop_back();
  }
  std::vector<BigRational> c_;  // c_[k] t^k
};

// P(t) exp(-t^(2n+2)/(2n+2)).
struct ExpPoly {
  int n = 0;
  Poly p;

  ExpPoly() = default;
  ExpPoly(int n_, Poly p_) : n(n_), p(std::move(p_)) {}

  bool is_zero() const { return p.is_zero(); }

  // d/dt: (P' - t^(2n+1) P) with the same weight.
  ExpPoly derivative() const { return {n, p.derivative() - p.shift_mul(2 * n + 1)}; }
  ExpPoly nth_derivative(unsigned j) const {
    ExpPoly f = *this;
    for (unsigned i = 0; i < j; ++i) f = f.derivative();
    return f;
  }
  // t d/dt.
  ExpPoly t_derivative() const {
    return {n, p.derivative().shift_mul(1) - p.shift_mul(2 * n + 2)};
  }
  ExpPoly shift_mul(unsigned k) const { return {n, p.shift_mul(k)}; }
  ExpPoly operator*(const BigRational& s) const { return {n, p * s}; }

  ExpPoly operator+(const ExpPoly& o) const;
  ExpPoly operator-(const ExpPoly& o) const;

  // Weight exponent t^(2n+2)/(2n+2) at a given t.
  double weight_exponent(double t) const;
  double eval_double(double t) const;
};

}  // namespace gforge
