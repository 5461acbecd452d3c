// SPDX-License-Identifier: Apache-2.0
//
// Two-point Hermite interpolation through confluent divided differences.
// Given the jets (value and derivatives through order J) at both ends of an
// interval, this reproduces the unique degree-(2J+1) interpolant and any
// requested number of its derivatives.  Used wherever tabulated jets have to
// be evaluated between nodes.

#pragma once

#include <stdexcept>
#include <vector>

namespace gforge {

template <typename T>
class HermitePair {
 public:
  // f0[k], f1[k]: k-th derivative at x0 resp. x1, 0 <= k <= jet.
  void build(double x0, double x1, const T* f0, const T* f1, int jet) {
    if (jet < 0 || x0 == x1) throw std::invalid_argument("HermitePair: bad nodes");
    x0_ = x0;
    x1_ = x1;
    jet_ = jet;
    const int half = jet + 1;
    const int M = 2 * half;
    tab_.assign(static_cast<size_t>(M) * M, T{});
    coef_.assign(M, T{});
    // Column 0: values at each (repeated) node.
    for (int i = 0; i < M; ++i) tab_[idx(i, 0, M)] = (i < half) ? f0[0] : f1[0];
    // Factorial scaling for the confluent entries.
    std::vector<double> inv_fact(half, 1.0);
    for (int k = 1; k < half; ++k) inv_fact[k] = inv_fact[k - 1] / k;
    const double dx = x1 - x0;
    for (int j = 1; j < M; ++j) {
      for (int i = j; i < M; ++i) {
        const bool same = (i < half) || (i - j >= half);
        if (same) {
          // Nodes i and i-j coincide: Taylor entry f^(j)/j! at that node.
          const T* f = (i < half) ? f0 : f1;
          tab_[idx(i, j, M)] = f[j] * inv_fact[j];
        } else {
          const double denom = (i < half ? 0.0 : dx) - (i - j < half ? 0.0 : dx);
          tab_[idx(i, j, M)] = (tab_[idx(i, j - 1, M)] - tab_[idx(i - 1, j - 1, M)]) / denom;
        }
      }
    }
    for (int i = 0; i < M; ++i) coef_[i] = tab_[idx(i, i, M)];
  }

  // Fills out[0..k_out] with the interpolant and its derivatives at x.
  void eval(double x, int k_out, T* out) const {
    const int half = jet_ + 1;
    const int M = 2 * half;
    std::vector<T> d(static_cast<size_t>(k_out) + 1, T{});
    d[0] = coef_[M - 1];
    for (int i = M - 2; i >= 0; --i) {
      const double dx = x - (i < half ? x0_ : x1_);
      for (int k = k_out; k >= 1; --k) d[k] = d[k] * dx + static_cast<double>(k) * d[k - 1];
      d[0] = d[0] * dx + coef_[i];
    }
    for (int k = 0; k <= k_out; ++k) out[k] = d[k];
  }

  double x0() const { return x0_; }
  double x1() const { return x1_; }
  int jet() const { return jet_; }
  bool covers(double x0, double x1) const { return x0 == x0_ && x1 == x1_ && jet_ >= 0; }

 private:
  static size_t idx(int i, int j, int M) { return static_cast<size_t>(i) * M + j; }
  double x0_ = 0.0, x1_ = 0.0;
  int jet_ = -1;
  std::vector<T> tab_, coef_;
};

}  // namespace gforge
