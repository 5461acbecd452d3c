// SPDX-License-Identifier: Apache-2.0

#include "gforge/exppoly.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gforge {

Poly& Poly::operator+=(const Poly& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size());
  for (size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
  trim();
  return *this;
}

Poly& Poly::operator-=(const Poly& o) {
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size());
  for (size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
  trim();
  return *this;
}

Poly operator*(const Poly& a, const Poly& b) {
  if (a.is_zero() || b.is_zero()) return Poly();
  std::vector<BigRational> out(a.c_.size() + b.c_.size() - 1);
  for (size_t i = 0; i < a.c_.size(); ++i) {
    if (a.c_[i].is_zero()) continue;
    for (size_t j = 0; j < b.c_.size(); ++j) {
      if (b.c_[j].is_zero()) continue;
      out[i + j] += a.c_[i] * b.c_[j];
    }
  }
  return Poly(std::move(out));
}

Poly Poly::operator*(const BigRational& s) const {
  if (s.is_zero()) return Poly();
  std::vector<BigRational> out(c_);
  for (auto& c : out) c *= s;
  return Poly(std::move(out));
}

Poly Poly::shift_mul(unsigned k) const {
  if (is_zero()) return Poly();
  std::vector<BigRational> out(c_.size() + k);
  for (size_t i = 0; i < c_.size(); ++i) out[i + k] = c_[i];
  return Poly(std::move(out));
}

Poly Poly::derivative() const {
  if (c_.size() <= 1) return Poly();
  std::vector<BigRational> out(c_.size() - 1);
  for (size_t i = 1; i < c_.size(); ++i)
    out[i - 1] = c_[i] * BigRational(static_cast<long>(i));
  return Poly(std::move(out));
}

Poly Poly::subst_power(unsigned K, const BigRational& scale) const {
  if (is_zero()) return Poly();
  if (K == 0) throw std::invalid_argument("Poly::subst_power: K must be positive");
  std::vector<BigRational> out((c_.size() - 1) * K + 1);
  BigRational sp = 1;
  for (size_t i = 0; i < c_.size(); ++i) {
    out[i * K] += c_[i] * sp;
    sp *= scale;
  }
  return Poly(std::move(out));
}

BigRational Poly::eval(const BigRational& t) const {
  BigRational acc = 0;
  for (size_t i = c_.size(); i-- > 0;) {
    acc *= t;
    acc += c_[i];
  }
  return acc;
}

double Poly::eval_double(double t) const {
  double acc = 0.0;
  for (size_t i = c_.size(); i-- > 0;) acc = acc * t + c_[i].to_double();
  return acc;
}

std::string Poly::str() const {
  if (is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (size_t i = 0; i < c_.size(); ++i) {
    if (c_[i].is_zero()) continue;
    if (!first) os << " + ";
    os << "(" << c_[i] << ")";
    if (i > 0) os << "*t^" << i;
    first = false;
  }
  return os.str();
}

ExpPoly ExpPoly::operator+(const ExpPoly& o) const {
  if (n != o.n && !is_zero() && !o.is_zero())
    throw std::invalid_argument("ExpPoly: mixing different weights");
  return {is_zero() ? o.n : n, p + o.p};
}

ExpPoly ExpPoly::operator-(const ExpPoly& o) const {
  if (n != o.n && !is_zero() && !o.is_zero())
    throw std::invalid_argument("ExpPoly: mixing different weights");
  return {is_zero() ? o.n : n, p - o.p};
}

double ExpPoly::weight_exponent(double t) const {
  return std::pow(t, 2 * n + 2) / (2 * n + 2);
}

double ExpPoly::eval_double(double t) const {
  return p.eval_double(t) * std::exp(-weight_exponent(t));
}

}  // namespace gforge
