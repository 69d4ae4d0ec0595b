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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clickseg/error.hpp"

namespace clickseg {

struct Dims {
  int width = 0;
  int height = 0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(Dims d) { return std::to_string(d.width) + "x" + std::to_string(d.height); }

/// Row-major 2-D grid of values. The tag parameter separates rasters that share a
/// value type but not a meaning (probabilities vs. guidance vs. plain distances).
template <class T, class Tag = void>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{}) : dims_{width, height} {
    require(width >= 1 && height >= 1, "raster dimensions must be positive, got " + to_string(dims_));
    data_.assign(dims_.size(), fill);
  }
  Raster(Dims dims, T fill = T{}) : Raster(dims.width, dims.height, fill) {}
  Raster(Dims dims, std::vector<T> values) : dims_(dims), data_(std::move(values)) {
    require(dims.width >= 1 && dims.height >= 1, "raster dimensions must be positive, got " + to_string(dims));
    require(data_.size() == dims.size(), "raster value count does not match " + to_string(dims));
  }

  int width() const { return dims_.width; }
  int height() const { return dims_.height; }
  Dims dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool contains(int x, int y) const { return dims_.contains(x, y); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(dims_.width) + static_cast<std::size_t>(x);
  }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& data() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct ProbabilityTag;
struct GuidanceTag;

using Image = Raster<Rgb>;
/// Labels are 0 (background) or 1 (foreground).
using BinaryMask = Raster<std::uint8_t>;
using ProbabilityMap = Raster<double, ProbabilityTag>;
using GuidanceMap = Raster<double, GuidanceTag>;
using RealMap = Raster<double>;

inline std::size_t count_foreground(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }));
}

template <class A, class B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (a.dims() != b.dims()) {
    fail(std::string(what) + ": dimension mismatch " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
}

/// Foreground iff p >= 0.5.
inline BinaryMask threshold(const ProbabilityMap& p, double level = 0.5) {
  BinaryMask m(p.dims());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = p[i] >= level ? 1 : 0;
  return m;
}

inline BinaryMask mask_xor(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b, "mask_xor");
  BinaryMask out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] != 0) != (b[i] != 0) ? 1 : 0;
  return out;
}

inline BinaryMask mask_not(const BinaryMask& a) {
  BinaryMask out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ? 0 : 1;
  return out;
}

}  // namespace clickseg
