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

#include <cstdint>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/raster.hpp"

namespace clickseg {

/// Row-major run lengths. counts[0] is the leading background run and may be 0.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint64_t> counts;
  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const BinaryMask& m) {
  RleMask r{m.width(), m.height(), {}};
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (std::uint8_t v : m) {
    const std::uint8_t label = v ? 1 : 0;
    if (label != current) {
      r.counts.push_back(run);
      run = 0;
      current = label;
    }
    ++run;
  }
  r.counts.push_back(run);
  return r;
}

inline BinaryMask rle_decode(const RleMask& r) {
  require(r.width >= 1 && r.height >= 1, "rle: dimensions must be positive");
  const std::uint64_t total = std::accumulate(r.counts.begin(), r.counts.end(), std::uint64_t{0});
  const Dims dims{r.width, r.height};
  require(total == dims.size(), "rle: counts sum to " + std::to_string(total) + ", expected " +
                                    std::to_string(dims.size()));
  BinaryMask m(dims);
  std::size_t pos = 0;
  std::uint8_t label = 0;
  for (std::uint64_t c : r.counts) {
    std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(pos), c, label);
    pos += c;
    label ^= 1;
  }
  return m;
}

inline void to_json(nlohmann::json& j, const RleMask& r) {
  j = nlohmann::json{{"width", r.width}, {"height", r.height}, {"counts", r.counts}};
}

inline void from_json(const nlohmann::json& j, RleMask& r) {
  try {
    j.at("width").get_to(r.width);
    j.at("height").get_to(r.height);
    j.at("counts").get_to(r.counts);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("rle json: ") + e.what());
  }
}

}  // namespace clickseg
