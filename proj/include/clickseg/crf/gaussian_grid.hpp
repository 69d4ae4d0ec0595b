// Copyright 2026 The ClickSeg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Approximate Gaussian filtering in a D-dimensional feature space on a regular
// grid: splat, separable blur, slice. Features are pre-scaled so the target
// kernel is exp(-|fi - fj|^2 / 2).
//
// Two interpolation schemes:
//  - linear: 2 taps per axis. Splat and slice widen the kernel by cell^2 / 3
//    per axis on average, so the blur uses variance 1 - cell^2 / 3 and is
//    normalized to the target kernel's mass.
//  - cubic: 4-tap Lagrange interpolation on both sides of an exact node kernel,
//    so the effective kernel interpolates exp(-d^2/2) in both arguments.
//
// Cells sit symmetrically around the origin, so negating one feature
// coordinate mirrors the grid exactly.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "clickseg/error.hpp"

namespace clickseg::crf {

enum class Interpolation { linear, cubic };

template <std::size_t D>
class GaussianGrid {
 public:
  using Feature = std::array<double, D>;

  /// `cell` is the per-axis grid spacing in feature units. All spacings grow together
  /// while the grid would exceed `max_cells`.
  GaussianGrid(std::span<const Feature> features, std::array<double, D> cell, std::size_t max_cells,
               Interpolation interp = Interpolation::cubic)
      : interp_(interp), taps_(interp == Interpolation::cubic ? 4 : 2) {
    require(!features.empty(), "gaussian grid: no features");
    for (double c : cell) require(c > 0.0 && c < 1.5, "gaussian grid: cell must be in (0, 1.5)");
    std::array<double, D> extent{};
    for (const Feature& f : features)
      for (std::size_t d = 0; d < D; ++d) extent[d] = std::max(extent[d], std::abs(f[d]));

    // Stencil covers nodes lo - lead .. lo - lead + taps - 1.
    lead_ = interp_ == Interpolation::cubic ? 1 : 0;
    while (true) {
      std::size_t total = 1;
      for (std::size_t d = 0; d < D; ++d) {
        offset_[d] = static_cast<int>(std::ceil(extent[d] / cell[d])) + lead_;
        dims_[d] = static_cast<std::size_t>(2 * offset_[d] + 2);
        total *= dims_[d];
      }
      const double widest = *std::max_element(cell.begin(), cell.end());
      if (total <= max_cells || widest >= 1.0) {
        cell_ = cell;
        cells_ = total;
        break;
      }
      for (double& c : cell) c = std::min(1.0, c * 1.25);
    }
    std::size_t stride = 1;
    for (std::size_t d = D; d-- > 0;) {
      strides_[d] = stride;
      stride *= dims_[d];
    }
    for (std::size_t d = 0; d < D; ++d) build_kernel(d);

    const std::size_t n = features.size();
    base_.resize(n);
    weights_.resize(n * D * taps_);
    self_weight_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t base = 0;
      double self = 1.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double u = features[i][d] / cell_[d] + offset_[d];
        int lo = static_cast<int>(std::floor(u));
        lo = std::clamp(lo, lead_, static_cast<int>(dims_[d]) - (taps_ - lead_));
        const double t = u - lo;
        double* w = &weights_[(i * D + d) * taps_];
        stencil(t, w);
        base += static_cast<std::size_t>(lo - lead_) * strides_[d];
        double s = 0.0;
        for (int a = 0; a < taps_; ++a)
          for (int b = 0; b < taps_; ++b) s += w[a] * w[b] * kernel_at(d, a - b);
        self *= s;
      }
      base_[i] = base;
      self_weight_[i] = self;
    }
    grid_.assign(cells_, 0.0);
  }

  const std::array<double, D>& cell() const { return cell_; }
  std::size_t cell_count() const { return cells_; }

  /// The grid's estimate of each point's kernel weight with itself (exactly 1 for an exact filter).
  const std::vector<double>& self_weight() const { return self_weight_; }

  /// out_i = sum_j k(f_i, f_j) * values_j, including j == i.
  void filter(std::span<const double> values, std::span<double> out) {
    require(values.size() == base_.size() && out.size() == base_.size(), "gaussian grid: size mismatch");
    std::fill(grid_.begin(), grid_.end(), 0.0);
    for (std::size_t i = 0; i < base_.size(); ++i) {
      const double v = values[i];
      if (v == 0.0) continue;
      for_each_tap(i, [&](std::size_t idx, double w) { grid_[idx] += w * v; });
    }
    for (std::size_t d = 0; d < D; ++d) blur_axis(d);
    for (std::size_t i = 0; i < base_.size(); ++i) {
      double acc = 0.0;
      for_each_tap(i, [&](std::size_t idx, double w) { acc += w * grid_[idx]; });
      out[i] = acc;
    }
  }

 private:
  void stencil(double t, double* w) const {
    if (interp_ == Interpolation::linear) {
      w[0] = 1.0 - t;
      w[1] = t;
      return;
    }
    // Lagrange basis on nodes -1, 0, 1, 2.
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
  }

  // Tensor-product stencil, walked as a mixed-radix counter over D axes.
  template <class F>
  void for_each_tap(std::size_t i, F&& f) const {
    const double* w = &weights_[i * D * taps_];
    std::array<int, D> digit{};
    std::array<double, D + 1> partial{};
    std::array<std::size_t, D + 1> index{};
    partial[0] = 1.0;
    index[0] = base_[i];
    for (std::size_t d = 0; d < D; ++d) {
      partial[d + 1] = partial[d] * w[d * taps_];
      index[d + 1] = index[d];
    }
    while (true) {
      f(index[D], partial[D]);
      std::size_t d = D;
      while (d-- > 0) {
        if (++digit[d] < taps_) break;
        digit[d] = 0;
      }
      if (d == static_cast<std::size_t>(-1)) return;
      for (std::size_t e = d; e < D; ++e) {
        partial[e + 1] = partial[e] * w[e * taps_ + digit[e]];
        index[e + 1] = index[e] + static_cast<std::size_t>(digit[e]) * strides_[e];
      }
    }
  }

  double kernel_at(std::size_t d, int k) const {
    const auto a = static_cast<std::size_t>(std::abs(k));
    return a < kernel_[d].size() ? kernel_[d][a] : 0.0;
  }

  void build_kernel(std::size_t d) {
    const double c = cell_[d];
    auto& kern = kernel_[d];
    if (interp_ == Interpolation::cubic) {
      const int radius = static_cast<int>(std::ceil(5.0 / c));
      kern.assign(static_cast<std::size_t>(radius) + 1, 0.0);
      for (int k = 0; k <= radius; ++k) kern[k] = std::exp(-(k * c) * (k * c) / 2.0);
      return;
    }
    const double var = 1.0 - c * c / 3.0;
    const int radius = static_cast<int>(std::ceil(4.0 * std::sqrt(var) / c));
    kern.assign(static_cast<std::size_t>(radius) + 1, 0.0);
    double sum = 0.0;
    for (int k = 0; k <= radius; ++k) {
      kern[k] = std::exp(-(k * c) * (k * c) / (2.0 * var));
      sum += k == 0 ? kern[k] : 2.0 * kern[k];
    }
    // Mass of exp(-x^2/2) is sqrt(2 pi); each cell covers `c` feature units.
    const double scale = std::sqrt(2.0 * 3.14159265358979323846) / (c * sum);
    for (double& k : kern) k *= scale;
  }

  void blur_axis(std::size_t axis) {
    const std::size_t n = dims_[axis];
    const std::size_t stride = strides_[axis];
    const std::size_t lines = cells_ / n;
    line_.resize(n);
    const auto& kern = kernel_[axis];
    const int radius = static_cast<int>(kern.size()) - 1;
    for (std::size_t line = 0; line < lines; ++line) {
      const std::size_t start = (line / stride) * stride * n + line % stride;
      bool any = false;
      for (std::size_t a = 0; a < n; ++a) {
        line_[a] = grid_[start + a * stride];
        any = any || line_[a] != 0.0;
      }
      if (!any) continue;
      for (std::size_t a = 0; a < n; ++a) {
        double acc = 0.0;
        const int from = std::max(0, static_cast<int>(a) - radius);
        const int to = std::min(static_cast<int>(n) - 1, static_cast<int>(a) + radius);
        for (int b = from; b <= to; ++b) acc += kern[std::abs(b - static_cast<int>(a))] * line_[b];
        grid_[start + a * stride] = acc;
      }
    }
  }

  Interpolation interp_;
  int taps_;
  int lead_ = 0;
  std::array<double, D> cell_{};
  std::size_t cells_ = 0;
  std::array<std::size_t, D> dims_{};
  std::array<std::size_t, D> strides_{};
  std::array<int, D> offset_{};
  std::array<std::vector<double>, D> kernel_;
  std::vector<std::size_t> base_;
  std::vector<double> weights_;
  std::vector<double> self_weight_;
  std::vector<double> grid_;
  std::vector<double> line_;
};

}  // namespace clickseg::crf
