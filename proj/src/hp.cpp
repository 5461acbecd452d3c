// SPDX-License-Identifier: Apache-2.0

#include "gforge/hp.hpp"

#include <cstdio>
#include <cstdlib>

namespace gforge {

namespace {
mpfr_prec_t g_default_prec = 128;
}

void HPFloat::set_default_precision(unsigned bits) {
  if (bits < 24) bits = 24;
  g_default_prec = static_cast<mpfr_prec_t>(bits);
}

unsigned HPFloat::default_precision() { return static_cast<unsigned>(g_default_prec); }

std::string HPFloat::str(unsigned digits) const {
  char* s = nullptr;
  if (mpfr_asprintf(&s, "%.*Rg", static_cast<int>(digits), x_) < 0) return "nan";
  std::string out(s);
  mpfr_free_str(s);
  return out;
}

}  // namespace gforge
