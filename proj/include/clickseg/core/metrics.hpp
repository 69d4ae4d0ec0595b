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

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "clickseg/core/raster.hpp"

namespace clickseg {

/// Jaccard index. Two empty masks agree perfectly (1.0).
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b, "iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0;
    const bool pb = b[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared distances, in place.
inline void edt_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    const auto meet = [&](int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p)); };
    double s = meet(v[k]);
    while (s <= z[k]) {  // z[0] = -inf stops the loop
      --k;
      s = meet(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace detail

/// Squared exact Euclidean distance from every pixel to the nearest foreground pixel.
/// +inf everywhere when the mask is empty.
inline RealMap squared_distance_transform(const BinaryMask& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int w = m.width();
  const int h = m.height();
  RealMap out(m.dims(), inf);
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);

  for (int x = 0; x < w; ++x) {
    f.resize(h);
    d.resize(h);
    for (int y = 0; y < h; ++y) f[y] = m.at(x, y) ? 0.0 : inf;
    detail::edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) out.at(x, y) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    f.resize(w);
    d.resize(w);
    for (int x = 0; x < w; ++x) f[x] = out.at(x, y);
    detail::edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) out.at(x, y) = d[x];
  }
  return out;
}

inline RealMap distance_transform(const BinaryMask& m) {
  RealMap out = squared_distance_transform(m);
  for (double& v : out) v = std::sqrt(v);
  return out;
}

/// Distance from each foreground pixel to the nearest background pixel (0 on background).
/// With `border_is_background` the frame outside the image also counts as background.
inline RealMap interior_distance(const BinaryMask& m, bool border_is_background = false) {
  if (!border_is_background) {
    RealMap d = distance_transform(mask_not(m));
    for (std::size_t i = 0; i < m.size(); ++i)
      if (!m[i]) d[i] = 0.0;
    return d;
  }
  BinaryMask padded(m.width() + 2, m.height() + 2, 1);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) padded.at(x + 1, y + 1) = m.at(x, y) ? 0 : 1;
  const RealMap dp = distance_transform(padded);
  RealMap d(m.dims(), 0.0);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) d.at(x, y) = m.at(x, y) ? dp.at(x + 1, y + 1) : 0.0;
  return d;
}

enum class Connectivity { four = 4, eight = 8 };

struct Components {
  /// -1 on background, component index otherwise.
  Raster<int> labels;
  std::vector<std::size_t> areas;

  std::size_t count() const { return areas.size(); }

  BinaryMask mask(std::size_t k) const {
    BinaryMask out(labels.dims());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == static_cast<int>(k) ? 1 : 0;
    return out;
  }

  /// Index of the largest component; ties go to the lowest index. Requires count() > 0.
  std::size_t largest() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < areas.size(); ++k)
      if (areas[k] > areas[best]) best = k;
    return best;
  }
};

/// Components are numbered in raster order of their first pixel.
inline Components connected_components(const BinaryMask& m, Connectivity conn = Connectivity::four) {
  Components out{Raster<int>(m.dims(), -1), {}};
  const int w = m.width();
  const int h = m.height();
  std::vector<std::size_t> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t seed = m.index(x0, y0);
      if (!m[seed] || out.labels[seed] >= 0) continue;
      const int label = static_cast<int>(out.areas.size());
      std::size_t area = 0;
      out.labels[seed] = label;
      stack.push_back(seed);
      while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        ++area;
        const int x = static_cast<int>(i % w);
        const int y = static_cast<int>(i / w);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (conn == Connectivity::four && dx != 0 && dy != 0) continue;
            const int nx = x + dx;
            const int ny = y + dy;
            if (!m.contains(nx, ny)) continue;
            const std::size_t j = m.index(nx, ny);
            if (m[j] && out.labels[j] < 0) {
              out.labels[j] = label;
              stack.push_back(j);
            }
          }
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

/// Mean over a (2r+1)^2 window, clipped at the image border.
template <class T, class Tag>
Raster<double, Tag> box_blur(const Raster<T, Tag>& src, int radius) {
  Raster<double, Tag> out(src.dims());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<double>(src[i]);
  if (radius <= 0) return out;
  const int w = src.width();
  const int h = src.height();
  Raster<double, Tag> tmp(src.dims());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      const int lo = std::max(0, x - radius);
      const int hi = std::min(w - 1, x + radius);
      for (int k = lo; k <= hi; ++k) s += out.at(k, y);
      tmp.at(x, y) = s / (hi - lo + 1);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      const int lo = std::max(0, y - radius);
      const int hi = std::min(h - 1, y + radius);
      for (int k = lo; k <= hi; ++k) s += tmp.at(x, k);
      out.at(x, y) = s / (hi - lo + 1);
    }
  }
  return out;
}

/// Euclidean dilation by `r` pixels.
inline BinaryMask dilate(const BinaryMask& m, double r) {
  const RealMap d = distance_transform(m);
  BinaryMask out(m.dims());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = d[i] <= r ? 1 : 0;
  return out;
}

/// Euclidean erosion by `r` pixels; outside the image is not background.
inline BinaryMask erode(const BinaryMask& m, double r) {
  const RealMap d = distance_transform(mask_not(m));
  BinaryMask out(m.dims());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = d[i] > r ? 1 : 0;
  return out;
}

inline BinaryMask translate(const BinaryMask& m, int dx, int dy) {
  BinaryMask out(m.dims());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y) && m.contains(x + dx, y + dy)) out.at(x + dx, y + dy) = 1;
  return out;
}

}  // namespace clickseg
