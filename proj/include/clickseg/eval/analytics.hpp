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
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/metrics.hpp"
#include "clickseg/engine/session.hpp"

namespace clickseg::eval {

/// Mean IOU of consecutive masks.
inline double temporal_consistency(std::span<const BinaryMask> masks) {
  require(masks.size() >= 2, "temporal_consistency: need at least two masks");
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < masks.size(); ++t) s += iou(masks[t], masks[t + 1]);
  return s / static_cast<double>(masks.size() - 1);
}

/// Pearson correlation coefficient.
inline double correlation(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), "correlation: lengths differ");
  require(xs.size() >= 2, "correlation: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, "correlation: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct IterationHistogram {
  std::map<std::size_t, std::size_t> counts;  // step total -> number of sessions
  std::optional<double> median;
};

/// Histogram of per-session refinement-step totals.
inline IterationHistogram iteration_histogram(std::span<const std::size_t> steps) {
  IterationHistogram h;
  if (steps.empty()) return h;
  for (std::size_t s : steps) ++h.counts[s];
  std::vector<std::size_t> sorted(steps.begin(), steps.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  h.median = n % 2 == 1 ? double(sorted[n / 2]) : (double(sorted[n / 2 - 1]) + double(sorted[n / 2])) / 2.0;
  return h;
}

inline IterationHistogram iteration_histogram(std::span<const engine::Session> sessions) {
  std::vector<std::size_t> steps;
  for (const auto& s : sessions) steps.push_back(s.step_count());
  return iteration_histogram(std::span<const std::size_t>(steps));
}

inline void to_json(nlohmann::json& j, const IterationHistogram& h) {
  auto counts = nlohmann::json::object();
  for (const auto& [k, v] : h.counts) counts[std::to_string(k)] = v;
  j = nlohmann::json{{"counts", counts}};
  j["median"] = h.median ? nlohmann::json(*h.median) : nlohmann::json(nullptr);
}

}  // namespace clickseg::eval
