// SPDX-License-Identifier: Apache-2.0
//
// High-precision floating point on top of MPFR, with just enough of a
// complex companion type for root-of-unity mode data.  The working precision
// is a process-wide default (bits) captured by each value at construction;
// derived constants can then be validated against 2^-(precision-16) style
// tolerances independently of the double-precision engine.

#pragma once

#include <mpfr.h>

#include <complex>
#include <string>
#include <utility>

#include "gforge/rational.hpp"

namespace gforge {

class HPFloat {
 public:
  static void set_default_precision(unsigned bits);
  static unsigned default_precision();

  HPFloat() { mpfr_init2(x_, default_precision()); mpfr_set_zero(x_, 1); }
  explicit HPFloat(double v) : HPFloat() { mpfr_set_d(x_, v, MPFR_RNDN); }
  explicit HPFloat(long v) : HPFloat() { mpfr_set_si(x_, v, MPFR_RNDN); }
  explicit HPFloat(const BigRational& v) : HPFloat() { mpfr_set_q(x_, v.raw(), MPFR_RNDN); }

  HPFloat(const HPFloat& o) {
    mpfr_init2(x_, mpfr_get_prec(o.x_));
    mpfr_set(x_, o.x_, MPFR_RNDN);
  }
  HPFloat(HPFloat&& o) noexcept {
    mpfr_init2(x_, mpfr_get_prec(o.x_));
    mpfr_swap(x_, o.x_);
  }
  HPFloat& operator=(const HPFloat& o) {
    if (this != &o) {
      mpfr_set_prec(x_, mpfr_get_prec(o.x_));
      mpfr_set(x_, o.x_, MPFR_RNDN);
    }
    return *this;
  }
  HPFloat& operator=(HPFloat&& o) noexcept {
    mpfr_swap(x_, o.x_);
    return *this;
  }
  ~HPFloat() { mpfr_clear(x_); }

  HPFloat& operator+=(const HPFloat& o) { mpfr_add(x_, x_, o.x_, MPFR_RNDN); return *this; }
  HPFloat& operator-=(const HPFloat& o) { mpfr_sub(x_, x_, o.x_, MPFR_RNDN); return *this; }
  HPFloat& operator*=(const HPFloat& o) { mpfr_mul(x_, x_, o.x_, MPFR_RNDN); return *this; }
  HPFloat& operator/=(const HPFloat& o) { mpfr_div(x_, x_, o.x_, MPFR_RNDN); return *this; }

  friend HPFloat operator+(HPFloat a, const HPFloat& b) { return a += b; }
  friend HPFloat operator-(HPFloat a, const HPFloat& b) { return a -= b; }
  friend HPFloat operator*(HPFloat a, const HPFloat& b) { return a *= b; }
  friend HPFloat operator/(HPFloat a, const HPFloat& b) { return a /= b; }
  HPFloat operator-() const {
    HPFloat r(*this);
    mpfr_neg(r.x_, r.x_, MPFR_RNDN);
    return r;
  }

  friend bool operator==(const HPFloat& a, const HPFloat& b) { return mpfr_cmp(a.x_, b.x_) == 0; }
  friend bool operator<(const HPFloat& a, const HPFloat& b) { return mpfr_cmp(a.x_, b.x_) < 0; }
  friend bool operator>(const HPFloat& a, const HPFloat& b) { return b < a; }
  friend bool operator<=(const HPFloat& a, const HPFloat& b) { return !(b < a); }
  friend bool operator>=(const HPFloat& a, const HPFloat& b) { return !(a < b); }

  HPFloat abs() const {
    HPFloat r(*this);
    mpfr_abs(r.x_, r.x_, MPFR_RNDN);
    return r;
  }
  HPFloat sqrt() const {
    HPFloat r(*this);
    mpfr_sqrt(r.x_, r.x_, MPFR_RNDN);
    return r;
  }
  // k-th root of a nonnegative value.
  HPFloat root(unsigned long k) const {
    HPFloat r(*this);
    mpfr_rootn_ui(r.x_, r.x_, k, MPFR_RNDN);
    return r;
  }
  HPFloat exp() const {
    HPFloat r(*this);
    mpfr_exp(r.x_, r.x_, MPFR_RNDN);
    return r;
  }
  HPFloat log() const {
    HPFloat r(*this);
    mpfr_log(r.x_, r.x_, MPFR_RNDN);
    return r;
  }
  HPFloat sin() const {
    HPFloat r(*this);
    mpfr_sin(r.x_, r.x_, MPFR_RNDN);
    return r;
  }
  HPFloat cos() const {
    HPFloat r(*this);
    mpfr_cos(r.x_, r.x_, MPFR_RNDN);
    return r;
  }
  HPFloat pow_si(long e) const {
    HPFloat r(*this);
    mpfr_pow_si(r.x_, r.x_, e, MPFR_RNDN);
    return r;
  }

  static HPFloat pi() {
    HPFloat r;
    mpfr_const_pi(r.x_, MPFR_RNDN);
    return r;
  }
  // 2^-(bits) at the value's own precision; handy for self-check tolerances.
  static HPFloat eps_for(unsigned bits) {
    HPFloat r(1L);
    mpfr_mul_2si(r.x_, r.x_, -static_cast<long>(bits), MPFR_RNDN);
    return r;
  }

  double to_double() const { return mpfr_get_d(x_, MPFR_RNDN); }
  unsigned precision() const { return static_cast<unsigned>(mpfr_get_prec(x_)); }
  std::string str(unsigned digits = 30) const;

  mpfr_srcptr raw() const { return x_; }
  mpfr_ptr raw() { return x_; }

 private:
  mpfr_t x_;
};

// Minimal complex arithmetic over HPFloat (libmpc is not assumed present).
struct ComplexHP {
  HPFloat re, im;

  ComplexHP() = default;
  ComplexHP(HPFloat r, HPFloat i) : re(std::move(r)), im(std::move(i)) {}
  explicit ComplexHP(double r, double i = 0.0) : re(r), im(i) {}

  static ComplexHP from_polar(const HPFloat& radius, const HPFloat& angle) {
    return ComplexHP(radius * angle.cos(), radius * angle.sin());
  }

  ComplexHP operator+(const ComplexHP& o) const { return {re + o.re, im + o.im}; }
  ComplexHP operator-(const ComplexHP& o) const { return {re - o.re, im - o.im}; }
  ComplexHP operator*(const ComplexHP& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  ComplexHP operator*(const HPFloat& s) const { return {re * s, im * s}; }
  ComplexHP operator/(const ComplexHP& o) const {
    HPFloat n = o.re * o.re + o.im * o.im;
    return {(re * o.re + im * o.im) / n, (im * o.re - re * o.im) / n};
  }
  ComplexHP operator-() const { return {-re, -im}; }
  ComplexHP conj() const { return {re, -im}; }

  HPFloat abs2() const { return re * re + im * im; }
  HPFloat abs() const { return abs2().sqrt(); }

  ComplexHP pow(unsigned e) const {
    ComplexHP acc(HPFloat(1L), HPFloat(0L));
    ComplexHP base = *this;
    while (e != 0) {
      if (e & 1u) acc = acc * base;
      base = base * base;
      e >>= 1;
    }
    return acc;
  }

  std::complex<double> to_complex() const { return {re.to_double(), im.to_double()}; }
};

}  // namespace gforge
