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

// Simulated users: positive clicks, the three negative-click strategies,
// correction clicks on error regions, and random strokes.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "clickseg/core/metrics.hpp"
#include "clickseg/core/random.hpp"
#include "clickseg/guidance.hpp"

namespace clickseg {

struct SamplingConfig {
  double d_margin = 3.0;
  double d_step = 5.0;
  double d_hull = 40.0;
  std::vector<int> n_corr_choices = {0, 1, 2, 3, 4, 5, 10, 20};
  std::uint64_t rng_seed = 0;

  void validate() const {
    require(d_margin > 0 && d_step > 0 && d_hull > 0, "sampling: distances must be > 0");
    require(!n_corr_choices.empty(), "sampling: n_corr_choices must be nonempty");
  }
};

enum class NegativeStrategy { hull_random = 1, other_objects = 2, hull_spread = 3 };

namespace detail {

inline double dist2(Point a, Point b) { return double(a.x - b.x) * (a.x - b.x) + double(a.y - b.y) * (a.y - b.y); }

inline std::vector<Point> pixels_where(const BinaryMask& m) {
  std::vector<Point> out;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) out.push_back({x, y});
  return out;
}

/// Uniform order over `candidates`, keeping those at least `spacing` from every accepted one.
inline std::vector<Point> spaced_random(std::vector<Point> candidates, std::size_t n, double spacing, Rng& rng) {
  shuffle(candidates, rng);
  std::vector<Point> chosen;
  const double s2 = spacing * spacing;
  for (const Point& p : candidates) {
    if (chosen.size() >= n) break;
    bool ok = true;
    for (const Point& q : chosen) {
      if (dist2(p, q) < s2) {
        ok = false;
        break;
      }
    }
    if (ok) chosen.push_back(p);
  }
  return chosen;
}

/// Greedy farthest-point selection; stops early once the best candidate is closer than `spacing`.
inline std::vector<Point> spaced_farthest(const std::vector<Point>& candidates, std::size_t n, double spacing,
                                          Rng& rng) {
  std::vector<Point> chosen;
  if (candidates.empty() || n == 0) return chosen;
  std::vector<double> nearest(candidates.size(), std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, candidates.size());
  const double s2 = spacing * spacing;
  while (true) {
    const Point last = candidates[pick];
    chosen.push_back(last);
    if (chosen.size() >= n) break;
    double best = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      nearest[i] = std::min(nearest[i], dist2(candidates[i], last));
      if (nearest[i] > best) {
        best = nearest[i];
        pick = i;
      }
    }
    if (best < s2) break;
  }
  return chosen;
}

inline std::vector<Click> as_clicks(const std::vector<Point>& pts, Polarity pol) {
  std::vector<Click> out;
  out.reserve(pts.size());
  for (const Point& p : pts) out.push_back({p.x, p.y, pol});
  return out;
}

}  // namespace detail

/// Foreground pixels whose distance to the background is at least d_margin.
inline BinaryMask positive_feasible(const BinaryMask& gt, const SamplingConfig& cfg) {
  const RealMap inner = interior_distance(gt);
  BinaryMask out(gt.dims());
  for (std::size_t i = 0; i < gt.size(); ++i) out[i] = gt[i] && inner[i] >= cfg.d_margin ? 1 : 0;
  return out;
}

inline std::vector<Click> sample_positive_clicks(const BinaryMask& gt, std::size_t n, const SamplingConfig& cfg) {
  cfg.validate();
  require(count_foreground(gt) > 0, "sample_positive_clicks: empty mask");
  Rng rng(cfg.rng_seed);
  auto pts = detail::spaced_random(detail::pixels_where(positive_feasible(gt, cfg)), n, cfg.d_step, rng);
  return detail::as_clicks(pts, Polarity::positive);
}

/// Background pixels in the band d_margin <= dist(object) <= d_hull.
inline BinaryMask negative_hull(const BinaryMask& gt, const SamplingConfig& cfg) {
  const RealMap d = distance_transform(gt);
  BinaryMask out(gt.dims());
  for (std::size_t i = 0; i < gt.size(); ++i) out[i] = !gt[i] && d[i] >= cfg.d_margin && d[i] <= cfg.d_hull ? 1 : 0;
  return out;
}

inline std::vector<Click> sample_negative_clicks(const BinaryMask& gt, std::span<const BinaryMask> other_objects,
                                                 std::size_t n, NegativeStrategy strategy,
                                                 const SamplingConfig& cfg) {
  cfg.validate();
  require(count_foreground(gt) < gt.size(), "sample_negative_clicks: background is empty");
  Rng rng(cfg.rng_seed);
  std::vector<Point> pts;
  if (strategy == NegativeStrategy::other_objects) {
    require(!other_objects.empty(), "sample_negative_clicks: strategy 2 needs other objects");
    const RealMap d = distance_transform(gt);
    BinaryMask feasible(gt.dims());
    for (const BinaryMask& o : other_objects) {
      require_same_dims(gt, o, "sample_negative_clicks");
      for (std::size_t i = 0; i < gt.size(); ++i)
        if (o[i] && !gt[i] && d[i] >= cfg.d_margin) feasible[i] = 1;
    }
    const auto candidates = detail::pixels_where(feasible);
    require(!candidates.empty(), "sample_negative_clicks: other objects leave no feasible pixel");
    pts = detail::spaced_random(candidates, n, cfg.d_step, rng);
  } else {
    const auto candidates = detail::pixels_where(negative_hull(gt, cfg));
    require(!candidates.empty(), "sample_negative_clicks: empty hull band");
    pts = strategy == NegativeStrategy::hull_spread ? detail::spaced_farthest(candidates, n, cfg.d_step, rng)
                                                    : detail::spaced_random(candidates, n, cfg.d_step, rng);
  }
  return detail::as_clicks(pts, Polarity::negative);
}

/// Clicks in pred XOR gt: positive on misses, negative on false alarms.
inline std::vector<Click> sample_correction_clicks(const BinaryMask& pred, const BinaryMask& gt, std::size_t n,
                                                   const SamplingConfig& cfg) {
  cfg.validate();
  require_same_dims(pred, gt, "sample_correction_clicks");
  Rng rng(cfg.rng_seed);
  const auto pts = detail::spaced_random(detail::pixels_where(mask_xor(pred, gt)), n, cfg.d_step, rng);
  std::vector<Click> out;
  for (const Point& p : pts)
    out.push_back({p.x, p.y, gt.at(p.x, p.y) ? Polarity::positive : Polarity::negative});
  return out;
}

/// Draws N_corr from cfg.n_corr_choices.
inline int draw_correction_count(const SamplingConfig& cfg, Rng& rng) {
  cfg.validate();
  return cfg.n_corr_choices[uniform_index(rng, cfg.n_corr_choices.size())];
}

/// Random polyline of 3-10 waypoints whose segments stay inside `region` eroded by d_margin.
inline Stroke simulate_stroke(const BinaryMask& region, Polarity polarity, const SamplingConfig& cfg) {
  cfg.validate();
  const BinaryMask feasible = positive_feasible(region, cfg);
  const auto candidates = detail::pixels_where(feasible);
  require(!candidates.empty(), "simulate_stroke: no feasible interior");
  Rng rng(cfg.rng_seed);

  const auto segment_inside = [&](Point a, Point b) {
    const double len = std::sqrt(detail::dist2(a, b));
    const int steps = static_cast<int>(std::ceil(len * 4.0));
    for (int s = 0; s <= steps; ++s) {
      const double t = steps == 0 ? 0.0 : double(s) / steps;
      const int x = static_cast<int>(std::lround(a.x + t * (b.x - a.x)));
      const int y = static_cast<int>(std::lround(a.y + t * (b.y - a.y)));
      if (!feasible.at(x, y)) return false;
    }
    return true;
  };

  Stroke s{{}, polarity};
  const std::size_t waypoints = 3 + uniform_index(rng, 8);
  s.points.push_back(candidates[uniform_index(rng, candidates.size())]);
  constexpr int kAttempts = 64;
  while (s.points.size() < waypoints) {
    const Point from = s.points.back();
    Point next = from;
    for (int a = 0; a < kAttempts; ++a) {
      const Point cand = candidates[uniform_index(rng, candidates.size())];
      if (segment_inside(from, cand)) {
        next = cand;
        break;
      }
    }
    s.points.push_back(next);
  }
  return s;
}

}  // namespace clickseg
