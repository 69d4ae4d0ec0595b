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

// Seeded synthetic scenes, corrupted masks and moving-object sequences.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "clickseg/core/metrics.hpp"
#include "clickseg/core/random.hpp"
#include "clickseg/core/raster.hpp"

namespace clickseg::eval {

struct Scene {
  Image image;
  BinaryMask gt;
};

struct Ellipse {
  double cx, cy, rx, ry, angle;

  bool contains(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = ((x - cx) * c + (y - cy) * s) / rx;
    const double v = (-(x - cx) * s + (y - cy) * c) / ry;
    return u * u + v * v <= 1.0;
  }
};

namespace detail {

inline Rgb random_color(Rng& rng) {
  return {static_cast<std::uint8_t>(uniform_index(rng, 256)), static_cast<std::uint8_t>(uniform_index(rng, 256)),
          static_cast<std::uint8_t>(uniform_index(rng, 256))};
}

inline double color_distance(const Rgb& a, const Rgb& b) {
  const double dr = double(a.r) - b.r, dg = double(a.g) - b.g, db = double(a.b) - b.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

/// Colors pairwise at least `min_dist` apart (RGB Euclidean).
inline std::vector<Rgb> palette(Rng& rng, std::size_t n, double min_dist) {
  std::vector<Rgb> out;
  while (out.size() < n) {
    const Rgb c = random_color(rng);
    if (std::all_of(out.begin(), out.end(), [&](const Rgb& o) { return color_distance(c, o) >= min_dist; }))
      out.push_back(c);
  }
  return out;
}

inline Rgb add_noise(const Rgb& c, double sigma, Rng& rng) {
  const auto ch = [&](std::uint8_t v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v + sigma * normal_real(rng)), 0L, 255L));
  };
  return {ch(c.r), ch(c.g), ch(c.b)};
}

inline Ellipse random_ellipse(Rng& rng, Dims d, double min_frac, double max_frac) {
  const double s = std::min(d.width, d.height);
  const double rx = uniform_real(rng, min_frac, max_frac) * s;
  const double ry = uniform_real(rng, min_frac, max_frac) * s;
  const double m = std::max(rx, ry);
  return {uniform_real(rng, m, d.width - 1 - m), uniform_real(rng, m, d.height - 1 - m), rx, ry,
          uniform_real(rng, 0.0, std::numbers::pi)};
}

// Object = union of one to three overlapping ellipses.
inline BinaryMask random_object(Rng& rng, Dims d) {
  BinaryMask m(d);
  const Ellipse core = random_ellipse(rng, d, 0.15, 0.3);
  std::vector<Ellipse> parts{core};
  const std::size_t extra = uniform_index(rng, 3);
  for (std::size_t k = 0; k < extra; ++k) {
    Ellipse e = core;
    e.rx = core.rx * uniform_real(rng, 0.4, 0.8);
    e.ry = core.ry * uniform_real(rng, 0.4, 0.8);
    const double a = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    e.cx = std::clamp(core.cx + std::cos(a) * core.rx * 0.8, e.rx, d.width - 1 - e.rx);
    e.cy = std::clamp(core.cy + std::sin(a) * core.ry * 0.8, e.ry, d.height - 1 - e.ry);
    e.angle = uniform_real(rng, 0.0, std::numbers::pi);
    parts.push_back(e);
  }
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      for (const Ellipse& e : parts)
        if (e.contains(x, y)) m.at(x, y) = 1;
  return m;
}

// Axis-aligned rectangles painted with palette indices over a base index.
inline Raster<int> patchwork(Rng& rng, Dims d, int base, std::span<const int> choices, int patches) {
  Raster<int> lab(d, base);
  for (int k = 0; k < patches; ++k) {
    const int w = 4 + int(uniform_index(rng, std::max(1, d.width / 3)));
    const int h = 4 + int(uniform_index(rng, std::max(1, d.height / 3)));
    const int x0 = int(uniform_index(rng, d.width)), y0 = int(uniform_index(rng, d.height));
    const int v = choices[uniform_index(rng, choices.size())];
    for (int y = y0; y < std::min(d.height, y0 + h); ++y)
      for (int x = x0; x < std::min(d.width, x0 + w); ++x) lab.at(x, y) = v;
  }
  return lab;
}

inline Image paint(const Raster<int>& lab, std::span<const Rgb> colors, double noise, Rng& rng) {
  Image img(lab.dims());
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = add_noise(colors[lab[i]], noise, rng);
  return img;
}

}  // namespace detail

/// One object of a single color on a single-color background.
inline Scene two_color_scene(Rng& rng, Dims d = {64, 64}, double noise = 6.0) {
  const auto colors = detail::palette(rng, 2, 120.0);
  Scene s;
  s.gt = detail::random_object(rng, d);
  Raster<int> lab(d, 0);
  for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = s.gt[i] ? 1 : 0;
  s.image = detail::paint(lab, colors, noise, rng);
  return s;
}

/// Patchwork background over three colors; the object is striped in two colors, one of which
/// also occurs in the background, so color alone does not separate it.
inline Scene textured_scene(Rng& rng, Dims d = {64, 64}, double noise = 8.0) {
  const auto colors = detail::palette(rng, 4, 70.0);
  Scene s;
  s.gt = detail::random_object(rng, d);
  const std::array<int, 2> bg_choices{1, 2};
  Raster<int> lab = detail::patchwork(rng, d, 0, bg_choices, 6);
  const int period = 3 + int(uniform_index(rng, 4));
  const bool vertical = uniform_index(rng, 2) == 1;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      if (s.gt.at(x, y)) lab.at(x, y) = ((vertical ? x : y) / period) % 2 == 0 ? 3 : 1;
  s.image = detail::paint(lab, colors, noise, rng);
  return s;
}

enum class Corruption { dilate, erode, translate };

struct CorruptedMask {
  BinaryMask mask;
  Corruption kind = Corruption::dilate;
  double iou = 0.0;
};

/// Degrades `gt` by a random corruption whose strength is chosen so the IOU is closest to `target`.
inline CorruptedMask corrupt_mask(const BinaryMask& gt, Rng& rng, double target = 0.5) {
  require(count_foreground(gt) > 0, "corrupt_mask: empty mask");
  const auto kind = static_cast<Corruption>(uniform_index(rng, 3));
  const double angle = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
  CorruptedMask best{gt, kind, 1.0};
  const int limit = std::max(gt.width(), gt.height());
  for (int r = 1; r <= limit; ++r) {
    BinaryMask m;
    switch (kind) {
      case Corruption::dilate:
        m = dilate(gt, r);
        break;
      case Corruption::erode:
        m = erode(gt, r);
        break;
      case Corruption::translate:
        m = translate(gt, int(std::lround(r * std::cos(angle))), int(std::lround(r * std::sin(angle))));
        break;
    }
    if (count_foreground(m) == 0) break;
    const double v = iou(m, gt);
    if (std::abs(v - target) < std::abs(best.iou - target)) best = {m, kind, v};
    if (v < target) break;
  }
  return best;
}

struct Sequence {
  std::vector<Image> frames;
  std::vector<BinaryMask> gts;
};

/// A rigid object translating at `speed` px/frame over a static background, bouncing off the
/// image border.
inline Sequence translating_sequence(Rng& rng, std::size_t frames, double speed, Dims d = {64, 64},
                                     bool textured = false, double noise = 6.0) {
  require(frames >= 1, "translating_sequence: need at least one frame");
  const auto colors = detail::palette(rng, 4, textured ? 70.0 : 120.0);
  const Ellipse shape = detail::random_ellipse(rng, {48, 48}, 0.18, 0.26);
  const double half_w = std::max(shape.rx, shape.ry) + 1, half_h = half_w;
  double cx = uniform_real(rng, half_w, d.width - 1 - half_w);
  double cy = uniform_real(rng, half_h, d.height - 1 - half_h);
  const double a = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
  double vx = speed * std::cos(a), vy = speed * std::sin(a);

  const std::array<int, 2> bg_choices{1, 2};
  const Raster<int> bg = textured ? detail::patchwork(rng, d, 0, bg_choices, 6) : Raster<int>(d, 0);
  const int period = 4;
  Sequence seq;
  for (std::size_t t = 0; t < frames; ++t) {
    Ellipse e = shape;
    e.cx = cx;
    e.cy = cy;
    BinaryMask gt(d);
    Raster<int> lab = bg;
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        if (!e.contains(x, y)) continue;
        gt.at(x, y) = 1;
        lab.at(x, y) = textured && ((x - int(std::floor(cx))) / period) % 2 != 0 ? 1 : 3;
      }
    }
    seq.frames.push_back(detail::paint(lab, colors, noise, rng));
    seq.gts.push_back(std::move(gt));
    cx += vx;
    cy += vy;
    if (cx < half_w || cx > d.width - 1 - half_w) {
      vx = -vx;
      cx = std::clamp(cx, half_w, d.width - 1 - half_w);
    }
    if (cy < half_h || cy > d.height - 1 - half_h) {
      vy = -vy;
      cy = std::clamp(cy, half_h, d.height - 1 - half_h);
    }
  }
  return seq;
}

}  // namespace clickseg::eval
