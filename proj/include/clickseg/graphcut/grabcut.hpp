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

// GrabCut without border matting: iterated GMM refit and exact min cut.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/raster.hpp"
#include "clickseg/graphcut/gmm.hpp"
#include "clickseg/graphcut/maxflow.hpp"
#include "clickseg/guidance.hpp"

namespace clickseg::graphcut {

/// Inclusive pixel box.
struct BoxPrior {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  friend bool operator==(const BoxPrior&, const BoxPrior&) = default;

  void validate(Dims d) const {
    require(x0 <= x1 && y0 <= y1, "box: corners out of order");
    require(d.contains(x0, y0) && d.contains(x1, y1), "box: outside the image");
  }
};

inline BoxPrior full_box(Dims d) { return {0, 0, d.width - 1, d.height - 1}; }

struct GrabCutParams {
  std::size_t components = 5;
  double gamma = 50.0;
  int rounds = 5;
  int em_iterations = 10;
  std::uint64_t seed = 0;

  void validate() const {
    require(components >= 1, "grabcut: components must be >= 1");
    require(gamma >= 0.0, "grabcut: gamma must be >= 0");
    require(rounds >= 1, "grabcut: rounds must be >= 1");
    require(em_iterations >= 0, "grabcut: em_iterations must be >= 0");
  }
};

namespace detail {

// Half of the 8-neighborhood; each unordered pair is visited once.
inline constexpr std::array<std::array<int, 2>, 4> kForwardNeighbors{{{1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

inline double color_dist2(const Rgb& a, const Rgb& b) {
  const double dr = double(a.r) - b.r, dg = double(a.g) - b.g, db = double(a.b) - b.b;
  return dr * dr + dg * dg + db * db;
}

}  // namespace detail

/// beta = 1 / (2 mean |z_i - z_j|^2) over 8-neighbor pairs; 0 for a constant image.
inline double compute_beta(const Image& img) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (const auto& o : detail::kForwardNeighbors) {
        const int nx = x + o[0], ny = y + o[1];
        if (!img.contains(nx, ny)) continue;
        sum += detail::color_dist2(img.at(x, y), img.at(nx, ny));
        ++pairs;
      }
    }
  }
  if (pairs == 0 || sum == 0.0) return 0.0;
  return 1.0 / (2.0 * sum / static_cast<double>(pairs));
}

/// Bounding box of current foreground and positive clicks, grown by `margin` and clipped.
inline BoxPrior heuristic_box(const BinaryMask& current, std::span<const Click> clicks, int margin) {
  require(margin >= 0, "heuristic_box: margin must be >= 0");
  require_in_bounds(clicks, current.dims());
  int x0 = current.width(), y0 = current.height(), x1 = -1, y1 = -1;
  const auto include = [&](int x, int y) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  };
  for (int y = 0; y < current.height(); ++y)
    for (int x = 0; x < current.width(); ++x)
      if (current.at(x, y)) include(x, y);
  for (const Click& c : clicks)
    if (c.polarity == Polarity::positive) include(c.x, c.y);
  require(x1 >= 0, "heuristic_box: no foreground pixel and no positive click");
  return {std::max(0, x0 - margin), std::max(0, y0 - margin), std::min(current.width() - 1, x1 + margin),
          std::min(current.height() - 1, y1 + margin)};
}

namespace detail {

inline Gmm fit_class(const Image& img, const BinaryMask& alpha, std::uint8_t label, const BinaryMask& fallback,
                     const GrabCutParams& prm, std::uint64_t seed) {
  std::vector<Rgb> px;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (alpha[i] == label) px.push_back(img[i]);
  if (px.size() < prm.components) {
    px.clear();
    for (std::size_t i = 0; i < img.size(); ++i)
      if (fallback[i]) px.push_back(img[i]);
  }
  require(!px.empty(), "grabcut: no pixels to model a class");
  const std::size_t k = std::min(prm.components, px.size());
  return fit_gmm(px, k, prm.em_iterations, seed).model;
}

inline BinaryMask border_pixels(Dims d) {
  BinaryMask m(d);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      if (x == 0 || y == 0 || x == d.width - 1 || y == d.height - 1) m.at(x, y) = 1;
  return m;
}

}  // namespace detail

struct GrabCutResult {
  BinaryMask mask;
  int rounds_run = 0;
};

/// Pixels outside `box` and negative-click pixels are hard background, positive-click pixels
/// hard foreground (a positive click outside the box still wins). `init` seeds the initial
/// foreground inside the box; without it the whole box is initial foreground.
inline GrabCutResult grabcut_run(const Image& img, const BoxPrior& box, std::span<const Click> clicks,
                                 const std::optional<BinaryMask>& init, const GrabCutParams& prm) {
  prm.validate();
  box.validate(img.dims());
  require_in_bounds(clicks, img.dims());
  if (init) require_same_dims(*init, img, "grabcut init");
  bool any_positive = false, positive_in_box = false;
  for (const Click& c : clicks) {
    if (c.polarity != Polarity::positive) continue;
    any_positive = true;
    positive_in_box = positive_in_box || box.contains(c.x, c.y);
  }
  require(!any_positive || positive_in_box, "grabcut: box excludes all positive clicks");

  const Dims d = img.dims();
  const int w = d.width;
  const std::size_t n = d.size();
  // -1 free, 0 hard background, 1 hard foreground.
  std::vector<int> hard(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (!box.contains(int(i % w), int(i / w))) hard[i] = 0;
  for (const Click& c : clicks) hard[c.y * std::size_t(w) + c.x] = c.polarity == Polarity::positive ? 1 : 0;

  BinaryMask alpha(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (hard[i] >= 0) {
      alpha[i] = static_cast<std::uint8_t>(hard[i]);
    } else {
      alpha[i] = init ? (*init)[i] : 1;
    }
  }

  const double beta = compute_beta(img);
  struct Link {
    std::size_t a, b;
    double w;
  };
  std::vector<Link> links;
  std::vector<double> link_sum(n, 0.0);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < w; ++x) {
      for (const auto& o : detail::kForwardNeighbors) {
        const int nx = x + o[0], ny = y + o[1];
        if (!img.contains(nx, ny)) continue;
        const double dist = std::hypot(double(o[0]), double(o[1]));
        const double wt = prm.gamma / dist * std::exp(-beta * detail::color_dist2(img.at(x, y), img.at(nx, ny)));
        const std::size_t a = img.index(x, y), b = img.index(nx, ny);
        links.push_back({a, b, wt});
        link_sum[a] += wt;
        link_sum[b] += wt;
      }
    }
  }
  const double big = 1.0 + *std::max_element(link_sum.begin(), link_sum.end());

  BinaryMask box_mask(d);
  for (std::size_t i = 0; i < n; ++i) box_mask[i] = box.contains(int(i % w), int(i / w)) ? 1 : 0;
  const BinaryMask border = detail::border_pixels(d);

  GrabCutResult out;
  for (int r = 0; r < prm.rounds; ++r) {
    const Gmm fg = detail::fit_class(img, alpha, 1, box_mask, prm, prm.seed + 2 * std::uint64_t(r));
    const Gmm bg = detail::fit_class(img, alpha, 0, border, prm, prm.seed + 2 * std::uint64_t(r) + 1);

    const std::size_t source = n, sink = n + 1;
    FlowNetwork net(n + 2, source, sink);
    for (std::size_t i = 0; i < n; ++i) {
      double to_source = 0.0, to_sink = 0.0;  // cost of labeling background / foreground
      if (hard[i] == 1) {
        to_source = big;
      } else if (hard[i] == 0) {
        to_sink = big;
      } else {
        const double cost_fg = -fg.log_density(img[i]);
        const double cost_bg = -bg.log_density(img[i]);
        const double lo = std::min(cost_fg, cost_bg);
        to_source = cost_bg - lo;
        to_sink = cost_fg - lo;
      }
      if (to_source > 0.0) net.add_edge(source, i, to_source);
      if (to_sink > 0.0) net.add_edge(i, sink, to_sink);
    }
    for (const Link& l : links) net.add_edge(l.a, l.b, l.w, l.w);
    net.max_flow();
    const std::vector<bool> side = net.min_cut_source_side();

    BinaryMask next(d);
    for (std::size_t i = 0; i < n; ++i) next[i] = hard[i] >= 0 ? std::uint8_t(hard[i]) : std::uint8_t(side[i]);
    out.rounds_run = r + 1;
    const bool converged = next == alpha;
    alpha = std::move(next);
    if (converged) break;
  }
  out.mask = std::move(alpha);
  return out;
}

inline BinaryMask grabcut_segment(const Image& img, const BoxPrior& box, std::span<const Click> clicks,
                                  const std::optional<BinaryMask>& init = std::nullopt,
                                  const GrabCutParams& prm = {}) {
  return grabcut_run(img, box, clicks, init, prm).mask;
}

inline void to_json(nlohmann::json& j, const BoxPrior& b) { j = nlohmann::json::array({b.x0, b.y0, b.x1, b.y1}); }

inline void from_json(const nlohmann::json& j, BoxPrior& b) {
  try {
    require(j.is_array() && j.size() == 4, "box json: expected [x0,y0,x1,y1]");
    b = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("box json: ") + e.what());
  }
}

inline void to_json(nlohmann::json& j, const GrabCutParams& p) {
  j = nlohmann::json{{"components", p.components}, {"gamma", p.gamma}, {"rounds", p.rounds},
                     {"em_iterations", p.em_iterations}, {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, GrabCutParams& p) {
  try {
    p.components = j.value("components", p.components);
    p.gamma = j.value("gamma", p.gamma);
    p.rounds = j.value("rounds", p.rounds);
    p.em_iterations = j.value("em_iterations", p.em_iterations);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("grabcut params json: ") + e.what());
  }
  p.validate();
}

}  // namespace clickseg::graphcut
