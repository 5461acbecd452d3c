// SPDX-License-Identifier: Apache-2.0
//
// Exact rational arithmetic on top of GMP's mpq layer, plus the small
// combinatorial helpers (falling factorials, binomial coefficients, Stirling
// numbers) that the coefficient tables are built from.  Everything here is
// exact; no rounding happens until a value is explicitly converted to a
// floating type.

#pragma once

#include <gmp.h>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gforge {

class BigRational {
 public:
  BigRational() { mpq_init(q_); }
  BigRational(long n) {  // NOLINT: implicit on purpose, integers embed
    mpq_init(q_);
    mpq_set_si(q_, n, 1);
  }
  BigRational(int n) : BigRational(static_cast<long>(n)) {}
  BigRational(long num, long den);
  explicit BigRational(const std::string& text);

  BigRational(const BigRational& o) {
    mpq_init(q_);
    mpq_set(q_, o.q_);
  }
  BigRational(BigRational&& o) noexcept {
    mpq_init(q_);
    mpq_swap(q_, o.q_);
  }
  BigRational& operator=(const BigRational& o) {
    if (this != &o) mpq_set(q_, o.q_);
    return *this;
  }
  BigRational& operator=(BigRational&& o) noexcept {
    mpq_swap(q_, o.q_);
    return *this;
  }
  ~BigRational() { mpq_clear(q_); }

  BigRational& operator+=(const BigRational& o) {
    mpq_add(q_, q_, o.q_);
    return *this;
  }
  BigRational& operator-=(const BigRational& o) {
    mpq_sub(q_, q_, o.q_);
    return *this;
  }
  BigRational& operator*=(const BigRational& o) {
    mpq_mul(q_, q_, o.q_);
    return *this;
  }
  BigRational& operator/=(const BigRational& o);

  friend BigRational operator+(BigRational a, const BigRational& b) { return a += b; }
  friend BigRational operator-(BigRational a, const BigRational& b) { return a -= b; }
  friend BigRational operator*(BigRational a, const BigRational& b) { return a *= b; }
  friend BigRational operator/(BigRational a, const BigRational& b) { return a /= b; }
  BigRational operator-() const {
    BigRational r;
    mpq_neg(r.q_, q_);
    return r;
  }

  friend bool operator==(const BigRational& a, const BigRational& b) {
    return mpq_equal(a.q_, b.q_) != 0;
  }
  friend bool operator!=(const BigRational& a, const BigRational& b) { return !(a == b); }
  friend bool operator<(const BigRational& a, const BigRational& b) {
    return mpq_cmp(a.q_, b.q_) < 0;
  }
  friend bool operator<=(const BigRational& a, const BigRational& b) {
    return mpq_cmp(a.q_, b.q_) <= 0;
  }
  friend bool operator>(const BigRational& a, const BigRational& b) { return b < a; }
  friend bool operator>=(const BigRational& a, const BigRational& b) { return b <= a; }

  bool is_zero() const { return mpq_sgn(q_) == 0; }
  bool is_integer() const { return mpz_cmp_ui(mpq_denref(q_), 1) == 0; }
  int sign() const { return mpq_sgn(q_); }

  BigRational abs() const {
    BigRational r;
    mpq_abs(r.q_, q_);
    return r;
  }
  BigRational inv() const;
  // Integer power; negative exponents require a nonzero value.
  BigRational pow(long e) const;

  double to_double() const { return mpq_get_d(q_); }
  // Canonical "p/q" (or "p" when the denominator is one).
  std::string str() const;

  mpq_srcptr raw() const { return q_; }
  mpq_ptr raw() { return q_; }

 private:
  mpq_t q_;
};

std::ostream& operator<<(std::ostream& os, const BigRational& v);

// Falling factorial x(x-1)...(x-k+1); the k = 0 product is 1.
BigRational pochhammer(const BigRational& x, unsigned k);

// Generalized binomial coefficient: pochhammer(top, k) / k!.
BigRational binomial(const BigRational& top, unsigned k);

BigRational factorial(unsigned n);

// Stirling numbers of the second kind S(n, k), as exact rationals for easy
// use in rational polynomial arithmetic.
BigRational stirling2(unsigned n, unsigned k);

// Parses "p", "p/q", or a sign-prefixed variant thereof.  Throws
// std::invalid_argument on malformed input or a zero denominator.
BigRational parse_rational(const std::string& text);

}  // namespace gforge
