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

// User interactions and their encodings as predictor input channels.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/metrics.hpp"
#include "clickseg/core/raster.hpp"

namespace clickseg {

enum class Polarity { positive, negative };

struct Click {
  int x = 0;
  int y = 0;
  Polarity polarity = Polarity::positive;
  friend bool operator==(const Click&, const Click&) = default;
};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Stroke {
  std::vector<Point> points;
  Polarity polarity = Polarity::positive;
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct EncodingConfig {
  double sigma = 10.0;        // Gaussian std, px
  double truncation = 255.0;  // distance-map cap, px
  double clamp_radius = 2.0;  // hard-constraint disk, px

  void validate() const {
    require(sigma > 0.0, "encoding: sigma must be > 0");
    require(truncation > 0.0, "encoding: truncation must be > 0");
    require(clamp_radius >= 0.0, "encoding: clamp_radius must be >= 0");
  }
};

inline void require_in_bounds(std::span<const Click> clicks, Dims dims) {
  for (const Click& c : clicks) {
    if (!dims.contains(c.x, c.y)) {
      fail("click (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") outside " + to_string(dims));
    }
  }
}

/// Single channel: +Gaussian per positive click, -Gaussian per negative click, clipped to [-1, 1].
inline GuidanceMap encode_gaussian(std::span<const Click> clicks, Dims dims, const EncodingConfig& cfg) {
  cfg.validate();
  require_in_bounds(clicks, dims);
  GuidanceMap g(dims, 0.0);
  const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  for (const Click& c : clicks) {
    const double sign = c.polarity == Polarity::positive ? 1.0 : -1.0;
    for (int y = 0; y < dims.height; ++y) {
      const double dy2 = double(y - c.y) * (y - c.y);
      for (int x = 0; x < dims.width; ++x) {
        const double d2 = double(x - c.x) * (x - c.x) + dy2;
        g.at(x, y) += sign * std::exp(-d2 * inv);
      }
    }
  }
  for (double& v : g) v = std::clamp(v, -1.0, 1.0);
  return g;
}

struct DistancePair {
  RealMap positive;
  RealMap negative;
};

/// Two channels of Euclidean distance to the closest click of each polarity, capped at
/// `truncation` (constant `truncation` when that polarity has no click).
inline DistancePair encode_distance_pair(std::span<const Click> clicks, Dims dims, const EncodingConfig& cfg) {
  cfg.validate();
  require_in_bounds(clicks, dims);
  const auto channel = [&](Polarity pol) {
    BinaryMask seeds(dims, 0);
    for (const Click& c : clicks)
      if (c.polarity == pol) seeds.at(c.x, c.y) = 1;
    RealMap d = distance_transform(seeds);
    for (double& v : d) v = std::min(v, cfg.truncation);
    return d;
  };
  return {channel(Polarity::positive), channel(Polarity::negative)};
}

/// Samples the polyline every `spacing` px of arc length, starting at the first point.
inline std::vector<Click> rasterize_stroke(const Stroke& s, double spacing) {
  require(!s.points.empty(), "stroke needs at least one point");
  require(spacing > 0.0, "stroke spacing must be > 0");
  std::vector<Click> out;
  const auto emit = [&](double x, double y) {
    out.push_back({static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)), s.polarity});
  };
  emit(s.points.front().x, s.points.front().y);
  double next = spacing;  // arc length of the next sample
  double walked = 0.0;
  constexpr double eps = 1e-9;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    const double x0 = s.points[i - 1].x;
    const double y0 = s.points[i - 1].y;
    const double dx = s.points[i].x - x0;
    const double dy = s.points[i].y - y0;
    const double len = std::hypot(dx, dy);
    while (len > 0.0 && next <= walked + len + eps) {
      const double t = std::min(1.0, (next - walked) / len);
      emit(x0 + t * dx, y0 + t * dy);
      next += spacing;
    }
    walked += len;
  }
  return out;
}

namespace detail {

template <class F>
void for_each_in_disk(const Click& c, double radius, Dims dims, F&& f) {
  const int r = static_cast<int>(std::floor(radius));
  const double r2 = radius * radius;
  for (int y = std::max(0, c.y - r); y <= std::min(dims.height - 1, c.y + r); ++y)
    for (int x = std::max(0, c.x - r); x <= std::min(dims.width - 1, c.x + r); ++x)
      if (double(x - c.x) * (x - c.x) + double(y - c.y) * (y - c.y) <= r2) f(x, y);
}

}  // namespace detail

/// Pixels within `clamp_radius` of a click take that click's label; later clicks win.
inline ProbabilityMap clamp_constraints(ProbabilityMap p, std::span<const Click> clicks, const EncodingConfig& cfg) {
  require_in_bounds(clicks, p.dims());
  for (const Click& c : clicks) {
    const double v = c.polarity == Polarity::positive ? 1.0 : 0.0;
    detail::for_each_in_disk(c, cfg.clamp_radius, p.dims(), [&](int x, int y) { p.at(x, y) = v; });
  }
  return p;
}

/// Same rule as clamp_constraints, applied to a thresholded mask.
inline BinaryMask clamp_mask(BinaryMask m, std::span<const Click> clicks, const EncodingConfig& cfg) {
  require_in_bounds(clicks, m.dims());
  for (const Click& c : clicks) {
    const std::uint8_t v = c.polarity == Polarity::positive ? 1 : 0;
    detail::for_each_in_disk(c, cfg.clamp_radius, m.dims(), [&](int x, int y) { m.at(x, y) = v; });
  }
  return m;
}

/// Expected label per pixel after clamping: -1 unconstrained, 0 background, 1 foreground.
inline Raster<int> clamp_labels(Dims dims, std::span<const Click> clicks, const EncodingConfig& cfg) {
  Raster<int> out(dims, -1);
  for (const Click& c : clicks) {
    const int v = c.polarity == Polarity::positive ? 1 : 0;
    detail::for_each_in_disk(c, cfg.clamp_radius, dims, [&](int x, int y) { out.at(x, y) = v; });
  }
  return out;
}

// JSON: {"x":int,"y":int,"polarity":"pos"|"neg"}, {"points":[[x,y],...],"polarity":...}

inline void to_json(nlohmann::json& j, Polarity p) { j = p == Polarity::positive ? "pos" : "neg"; }

inline void from_json(const nlohmann::json& j, Polarity& p) {
  const auto s = j.get<std::string>();
  if (s == "pos") {
    p = Polarity::positive;
  } else if (s == "neg") {
    p = Polarity::negative;
  } else {
    fail("polarity must be \"pos\" or \"neg\", got \"" + s + "\"");
  }
}

inline void to_json(nlohmann::json& j, const Click& c) {
  j = nlohmann::json{{"x", c.x}, {"y", c.y}, {"polarity", c.polarity}};
}

inline void from_json(const nlohmann::json& j, Click& c) {
  try {
    j.at("x").get_to(c.x);
    j.at("y").get_to(c.y);
    j.at("polarity").get_to(c.polarity);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("click json: ") + e.what());
  }
}

inline void to_json(nlohmann::json& j, const Stroke& s) {
  auto pts = nlohmann::json::array();
  for (const Point& p : s.points) pts.push_back({p.x, p.y});
  j = nlohmann::json{{"points", pts}, {"polarity", s.polarity}};
}

inline void from_json(const nlohmann::json& j, Stroke& s) {
  try {
    s.points.clear();
    for (const auto& p : j.at("points")) s.points.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    j.at("polarity").get_to(s.polarity);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("stroke json: ") + e.what());
  }
  require(!s.points.empty(), "stroke json: needs at least one point");
}

inline void to_json(nlohmann::json& j, const EncodingConfig& c) {
  j = nlohmann::json{{"sigma", c.sigma}, {"truncation", c.truncation}, {"clamp_radius", c.clamp_radius}};
}

/// Missing fields keep their defaults.
inline void from_json(const nlohmann::json& j, EncodingConfig& c) {
  try {
    c.sigma = j.value("sigma", c.sigma);
    c.truncation = j.value("truncation", c.truncation);
    c.clamp_radius = j.value("clamp_radius", c.clamp_radius);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("encoding json: ") + e.what());
  }
  c.validate();
}

}  // namespace clickseg
