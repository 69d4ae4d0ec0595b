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

// Binary fully connected CRF with Potts compatibility and two Gaussian pairwise
// kernels (appearance: position + color; smoothness: position only).
//
// Mean-field updates are parallel:
//   Q_i(fg) ∝ P_i       * exp(-sum_{j != i} k_ij Q_j(bg))
//   Q_i(bg) ∝ (1 - P_i) * exp(-sum_{j != i} k_ij Q_j(fg))
// with k_ij = w_app * k_app(i, j) + w_smooth * k_smooth(i, j).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/raster.hpp"
#include "clickseg/crf/gaussian_grid.hpp"

namespace clickseg::crf {

struct CrfParams {
  double w_app = 10.0;
  double theta_alpha = 80.0;  // px
  double theta_beta = 13.0;   // intensity units
  double w_smooth = 3.0;
  double theta_gamma = 3.0;  // px
  int iterations = 5;

  void validate() const {
    require(theta_alpha > 0 && theta_beta > 0 && theta_gamma > 0, "crf: kernel stds must be > 0");
    require(w_app >= 0 && w_smooth >= 0, "crf: weights must be >= 0");
    require(iterations >= 1, "crf: iterations must be >= 1");
  }
};

/// Options for the grid approximation of the appearance kernel.
struct FastOptions {
  // Grid spacing in kernel-std units, per feature group.
  double spatial_cell = 0.5;
  double color_cell = 0.75;
  Interpolation interpolation = Interpolation::linear;
  std::size_t max_cells = std::size_t{1} << 22;
};

struct Marginals {
  Dims dims;
  std::vector<double> fg;
  std::vector<double> bg;

  ProbabilityMap foreground() const { return ProbabilityMap(dims, fg); }
};

inline constexpr double kUnaryEpsilon = 1e-6;
inline constexpr std::size_t kReferenceMaxPixels = 64 * 64;

inline double clip_probability(double p) { return std::clamp(p, kUnaryEpsilon, 1.0 - kUnaryEpsilon); }

namespace detail {

inline double color_dist2(const Rgb& a, const Rgb& b) {
  const double dr = double(a.r) - b.r;
  const double dg = double(a.g) - b.g;
  const double db = double(a.b) - b.b;
  return dr * dr + dg * dg + db * db;
}

inline double pair_kernel(const Image& img, const CrfParams& prm, int xi, int yi, int xj, int yj) {
  const double dp = double(xi - xj) * (xi - xj) + double(yi - yj) * (yi - yj);
  double k = 0.0;
  if (prm.w_app > 0.0) {
    const double dc = color_dist2(img.at(xi, yi), img.at(xj, yj));
    k += prm.w_app * std::exp(-dp / (2 * prm.theta_alpha * prm.theta_alpha) - dc / (2 * prm.theta_beta * prm.theta_beta));
  }
  if (prm.w_smooth > 0.0) k += prm.w_smooth * std::exp(-dp / (2 * prm.theta_gamma * prm.theta_gamma));
  return k;
}

/// Normalized update from unary P and the two incoming messages. Equal messages leave
/// the unary untouched.
inline void update_pixel(double p, double msg_fg, double msg_bg, double& q_fg, double& q_bg) {
  const double pc = clip_probability(p);
  if (msg_fg == msg_bg) {
    q_fg = pc;
    q_bg = 1.0 - pc;
    return;
  }
  const double a = std::log(pc) - msg_fg;
  const double b = std::log1p(-pc) - msg_bg;
  q_fg = 1.0 / (1.0 + std::exp(b - a));
  q_bg = 1.0 / (1.0 + std::exp(a - b));
}

inline Marginals unary_marginals(const ProbabilityMap& p) {
  Marginals m{p.dims(), std::vector<double>(p.size()), std::vector<double>(p.size())};
  for (std::size_t i = 0; i < p.size(); ++i) update_pixel(p[i], 0.0, 0.0, m.fg[i], m.bg[i]);
  return m;
}

}  // namespace detail

/// E(x) = sum_i -log P(x_i) + sum_{i<j} [x_i != x_j] k_ij. O(N^2).
inline double energy(const BinaryMask& mask, const ProbabilityMap& p, const Image& img, const CrfParams& prm) {
  prm.validate();
  require_same_dims(mask, p, "crf energy");
  require_same_dims(mask, img, "crf energy");
  double e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = clip_probability(p[i]);
    e -= mask[i] ? std::log(pc) : std::log1p(-pc);
  }
  if (prm.w_app == 0.0 && prm.w_smooth == 0.0) return e;
  const int w = img.width();
  const std::size_t n = img.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((mask[i] != 0) == (mask[j] != 0)) continue;
      e += detail::pair_kernel(img, prm, int(i % w), int(i / w), int(j % w), int(j / w));
    }
  }
  return e;
}

/// Exact dense mean field. Images up to 64x64.
inline Marginals mean_field_reference(const ProbabilityMap& p, const Image& img, const CrfParams& prm) {
  prm.validate();
  require_same_dims(p, img, "mean_field_reference");
  const std::size_t n = img.size();
  require(n <= kReferenceMaxPixels, "mean_field_reference: image larger than 64x64 pixels");
  Marginals q = detail::unary_marginals(p);
  if (prm.w_app == 0.0 && prm.w_smooth == 0.0) return q;

  const int w = img.width();
  const int h = img.height();
  // Upper triangle, row i holds pairs (i, j > i).
  std::vector<double> k;
  k.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) k.push_back(detail::pair_kernel(img, prm, int(i % w), int(i / w), int(j % w), int(j / w)));
  const auto kernel = [&](std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return k[i * n - i * (i + 1) / 2 + (j - i - 1)];
  };

  // Messages sum row by row, pairing the columns x-d and x+d, so a mirrored input adds
  // the same terms in the same order and the result mirrors bit for bit.
  std::vector<double> msg_fg(n), msg_bg(n);
  for (int it = 0; it < prm.iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = std::size_t(y) * w + x;
        double sum_fg = 0.0, sum_bg = 0.0;
        for (int v = 0; v < h; ++v) {
          const std::size_t row = std::size_t(v) * w;
          double row_fg = 0.0, row_bg = 0.0;
          if (v != y) {
            const double kij = kernel(i, row + x);
            row_fg = kij * q.bg[row + x];
            row_bg = kij * q.fg[row + x];
          }
          for (int d = 1; d < w; ++d) {
            double l_fg = 0.0, l_bg = 0.0, r_fg = 0.0, r_bg = 0.0;
            if (x - d >= 0) {
              const double kij = kernel(i, row + x - d);
              l_fg = kij * q.bg[row + x - d];
              l_bg = kij * q.fg[row + x - d];
            }
            if (x + d < w) {
              const double kij = kernel(i, row + x + d);
              r_fg = kij * q.bg[row + x + d];
              r_bg = kij * q.fg[row + x + d];
            }
            row_fg += l_fg + r_fg;
            row_bg += l_bg + r_bg;
          }
          sum_fg += row_fg;
          sum_bg += row_bg;
        }
        msg_fg[i] = sum_fg;
        msg_bg[i] = sum_bg;
      }
    }
    for (std::size_t i = 0; i < n; ++i) detail::update_pixel(p[i], msg_fg[i], msg_bg[i], q.fg[i], q.bg[i]);
  }
  return q;
}

namespace detail {

/// Exact truncated separable Gaussian over pixel positions, self term included.
inline void smooth_filter(std::span<const double> in, std::span<double> out, Dims dims, double sigma,
                          std::vector<double>& tmp) {
  const int r = static_cast<int>(std::ceil(5.0 * sigma));
  std::vector<double> g(static_cast<std::size_t>(r) + 1);
  for (int k = 0; k <= r; ++k) g[k] = std::exp(-double(k) * k / (2 * sigma * sigma));
  const int w = dims.width;
  const int h = dims.height;
  tmp.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) acc += g[std::abs(xx - x)] * in[y * w + xx];
      tmp[y * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) acc += g[std::abs(yy - y)] * tmp[yy * w + x];
      out[y * w + x] = acc;
    }
  }
}

}  // namespace detail

/// Mean field with filtered message passing: exact separable smoothness kernel, grid-approximated
/// appearance kernel. Any image size.
inline Marginals mean_field_fast(const ProbabilityMap& p, const Image& img, const CrfParams& prm,
                                 const FastOptions& opt = {}) {
  prm.validate();
  require_same_dims(p, img, "mean_field_fast");
  Marginals q = detail::unary_marginals(p);
  if (prm.w_app == 0.0 && prm.w_smooth == 0.0) return q;

  const std::size_t n = img.size();
  const int w = img.width();
  const double cx = (img.width() - 1) / 2.0;
  const double cy = (img.height() - 1) / 2.0;

  std::optional<GaussianGrid<5>> grid;
  if (prm.w_app > 0.0) {
    // Colors are centered on the midrange of each channel so the grid only spans occupied colors.
    std::array<int, 3> lo{255, 255, 255}, hi{0, 0, 0};
    for (const Rgb& c : img) {
      const std::array<int, 3> v{c.r, c.g, c.b};
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], v[k]);
        hi[k] = std::max(hi[k], v[k]);
      }
    }
    std::array<double, 3> mid{};
    for (int k = 0; k < 3; ++k) mid[k] = (lo[k] + hi[k]) / 2.0;
    std::vector<GaussianGrid<5>::Feature> feats(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Rgb& c = img[i];
      feats[i] = {(double(i % w) - cx) / prm.theta_alpha, (double(i / w) - cy) / prm.theta_alpha,
                  (c.r - mid[0]) / prm.theta_beta, (c.g - mid[1]) / prm.theta_beta, (c.b - mid[2]) / prm.theta_beta};
    }
    const double sc = opt.spatial_cell;
    const double cc = opt.color_cell;
    grid.emplace(feats, std::array<double, 5>{sc, sc, cc, cc, cc}, opt.max_cells, opt.interpolation);
  }

  std::vector<double> app(n), smooth(n), tmp, msg_fg(n), msg_bg(n);
  for (int it = 0; it < prm.iterations; ++it) {
    // Message into fg comes from Q(bg) and vice versa; the self term is removed after filtering.
    std::fill(msg_fg.begin(), msg_fg.end(), 0.0);
    std::fill(msg_bg.begin(), msg_bg.end(), 0.0);
    if (grid) {
      grid->filter(q.fg, app);
      const auto& self = grid->self_weight();
      for (std::size_t i = 0; i < n; ++i) msg_bg[i] += prm.w_app * (app[i] - self[i] * q.fg[i]);
      grid->filter(q.bg, app);
      for (std::size_t i = 0; i < n; ++i) msg_fg[i] += prm.w_app * (app[i] - self[i] * q.bg[i]);
    }
    if (prm.w_smooth > 0.0) {
      detail::smooth_filter(q.fg, smooth, img.dims(), prm.theta_gamma, tmp);
      for (std::size_t i = 0; i < n; ++i) msg_bg[i] += prm.w_smooth * (smooth[i] - q.fg[i]);
      detail::smooth_filter(q.bg, smooth, img.dims(), prm.theta_gamma, tmp);
      for (std::size_t i = 0; i < n; ++i) msg_fg[i] += prm.w_smooth * (smooth[i] - q.bg[i]);
    }
    for (std::size_t i = 0; i < n; ++i) detail::update_pixel(p[i], msg_fg[i], msg_bg[i], q.fg[i], q.bg[i]);
  }
  return q;
}

/// Fast-path marginals thresholded at 0.5; ties are foreground.
inline BinaryMask crf_refine(const ProbabilityMap& p, const Image& img, const CrfParams& prm,
                             const FastOptions& opt = {}) {
  const Marginals q = mean_field_fast(p, img, prm, opt);
  BinaryMask m(p.dims());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = q.fg[i] >= 0.5 ? 1 : 0;
  return m;
}

inline void to_json(nlohmann::json& j, const CrfParams& c) {
  j = nlohmann::json{{"w_app", c.w_app},           {"theta_alpha", c.theta_alpha}, {"theta_beta", c.theta_beta},
                     {"w_smooth", c.w_smooth},     {"theta_gamma", c.theta_gamma}, {"iterations", c.iterations}};
}

/// Missing fields keep their defaults.
inline void from_json(const nlohmann::json& j, CrfParams& c) {
  try {
    c.w_app = j.value("w_app", c.w_app);
    c.theta_alpha = j.value("theta_alpha", c.theta_alpha);
    c.theta_beta = j.value("theta_beta", c.theta_beta);
    c.w_smooth = j.value("w_smooth", c.w_smooth);
    c.theta_gamma = j.value("theta_gamma", c.theta_gamma);
    c.iterations = j.value("iterations", c.iterations);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("crf params json: ") + e.what());
  }
  c.validate();
}

}  // namespace clickseg::crf
