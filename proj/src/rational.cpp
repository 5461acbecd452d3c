// SPDX-License-Identifier: Apache-2.0

#include "gforge/rational.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

namespace gforge {

BigRational::BigRational(long num, long den) {
  if (den == 0) throw std::invalid_argument("BigRational: zero denominator");
  mpq_init(q_);
  mpq_set_si(q_, num, 1);
  mpq_t d;
  mpq_init(d);
  mpq_set_si(d, den, 1);
  mpq_div(q_, q_, d);
  mpq_clear(d);
}

BigRational::BigRational(const std::string& text) : BigRational() {
  *this = parse_rational(text);
}

BigRational& BigRational::operator/=(const BigRational& o) {
  if (o.is_zero()) throw std::domain_error("BigRational: division by zero");
  mpq_div(q_, q_, o.q_);
  return *this;
}

BigRational BigRational::inv() const {
  if (is_zero()) throw std::domain_error("BigRational: inverse of zero");
  BigRational r;
  mpq_inv(r.q_, q_);
  return r;
}

BigRational BigRational::pow(long e) const {
  if (e < 0) return inv().pow(-e);
  BigRational base = *this;
  BigRational acc = 1;
  unsigned long k = static_cast<unsigned long>(e);
  while (k != 0) {
    if (k & 1u) acc *= base;
    base *= base;
    k >>= 1;
  }
  return acc;
}

std::string BigRational::str() const {
  char* s = mpq_get_str(nullptr, 10, q_);
  std::string out(s);
  std::free(s);
  return out;
}

std::ostream& operator<<(std::ostream& os, const BigRational& v) { return os << v.str(); }

BigRational pochhammer(const BigRational& x, unsigned k) {
  BigRational acc = 1;
  BigRational term = x;
  for (unsigned i = 0; i < k; ++i) {
    acc *= term;
    term -= 1;
  }
  return acc;
}

BigRational binomial(const BigRational& top, unsigned k) {
  return pochhammer(top, k) / factorial(k);
}

BigRational factorial(unsigned n) {
  BigRational acc = 1;
  for (unsigned i = 2; i <= n; ++i) acc *= BigRational(static_cast<long>(i));
  return acc;
}

BigRational stirling2(unsigned n, unsigned k) {
  if (k > n) return 0;
  if (n == 0) return 1;  // S(0,0) = 1
  if (k == 0) return 0;
  // Small triangular recurrence; n stays modest (<= a few dozen) in practice.
  std::vector<BigRational> row(n + 1);
  row[0] = 1;  // row for n' = 0
  for (unsigned np = 1; np <= n; ++np) {
    for (unsigned kp = std::min(np, n); kp >= 1; --kp) {
      row[kp] = BigRational(static_cast<long>(kp)) * row[kp] + row[kp - 1];
      if (kp == 1) break;
    }
    row[0] = 0;
  }
  return row[k];
}

BigRational parse_rational(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  if (s.empty()) throw std::invalid_argument("parse_rational: empty string");
  // Validate shape by hand: optional sign, digits, optional "/<digits>".
  auto is_digits = [](const std::string& t) {
    if (t.empty()) return false;
    for (char c : t)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
  };
  std::string num = s, den;
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    num = s.substr(0, slash);
    den = s.substr(slash + 1);
  }
  std::string num_digits = (!num.empty() && (num[0] == '+' || num[0] == '-')) ? num.substr(1) : num;
  if (!is_digits(num_digits) || (slash != std::string::npos && !is_digits(den)))
    throw std::invalid_argument("parse_rational: malformed rational '" + text + "'");
  if (s[0] == '+') s.erase(0, 1);  // mpq_set_str does not take an explicit plus

  BigRational r;
  if (mpq_set_str(r.raw(), s.c_str(), 10) != 0)
    throw std::invalid_argument("parse_rational: malformed rational '" + text + "'");
  if (mpz_cmp_ui(mpq_denref(r.raw()), 0) == 0)
    throw std::invalid_argument("parse_rational: zero denominator in '" + text + "'");
  mpq_canonicalize(r.raw());
  return r;
}

}  // namespace gforge
