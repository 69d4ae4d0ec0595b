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

// Interactive single-image refinement: one step is
// guidance -> backend -> clamp -> CRF -> threshold -> clamp.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clickseg/crf/dense_crf.hpp"
#include "clickseg/guidance.hpp"
#include "clickseg/predict.hpp"

namespace clickseg::engine {

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct SessionConfig {
  BackendSpec backend;
  EncodingConfig encoding;
  crf::CrfParams crf;
  bool use_prior_mask = true;  // feed the current mask to the backend
};

struct Session {
  std::string id;
  Image image;
  SessionConfig config;
  std::vector<std::vector<Click>> steps;  // clicks added by each refinement step
  std::vector<BinaryMask> masks;          // masks[0] is the initial mask; masks.size() == steps.size() + 1
  bool has_initial_mask = false;          // masks[0] was supplied rather than empty
  std::vector<Click> seed_clicks;         // soft guidance only: encoded, never clamped
  std::optional<BinaryMask> gt;           // evaluation mode
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;

  std::size_t step_count() const { return steps.size(); }
  const BinaryMask& current_mask() const { return masks.back(); }

  std::vector<Click> clicks() const {
    std::vector<Click> all;
    for (const auto& s : steps) all.insert(all.end(), s.begin(), s.end());
    return all;
  }
};

inline Session make_session(std::string id, Image image, SessionConfig config,
                            std::optional<BinaryMask> initial = std::nullopt) {
  config.backend.validate();
  config.encoding.validate();
  config.crf.validate();
  Session s;
  s.id = std::move(id);
  s.config = std::move(config);
  s.has_initial_mask = initial.has_value();
  if (initial) require_same_dims(image, *initial, "session initial mask");
  s.masks.push_back(initial ? std::move(*initial) : BinaryMask(image.dims()));
  s.image = std::move(image);
  s.created_ms = s.updated_ms = now_ms();
  return s;
}

/// The mask a step would produce from `clicks` (all clicks so far) and the prior `prior`.
inline BinaryMask run_pipeline(const Session& s, std::span<const Click> clicks,
                               const std::optional<BinaryMask>& prior) {
  require_in_bounds(clicks, s.image.dims());
  std::vector<Click> guided(s.seed_clicks.begin(), s.seed_clicks.end());
  guided.insert(guided.end(), clicks.begin(), clicks.end());
  PredictRequest req;
  req.image = s.image;
  req.guidance = encode_gaussian(guided, s.image.dims(), s.config.encoding);
  req.prior_mask = prior;
  req.clicks.assign(clicks.begin(), clicks.end());
  ProbabilityMap p = predict(s.config.backend, req);
  p = clamp_constraints(std::move(p), clicks, s.config.encoding);
  BinaryMask m = crf::crf_refine(p, s.image, s.config.crf);
  return clamp_mask(std::move(m), clicks, s.config.encoding);
}

inline std::optional<BinaryMask> prior_for_next_step(const Session& s) {
  if (!s.config.use_prior_mask) return std::nullopt;
  if (s.steps.empty() && !s.has_initial_mask) return std::nullopt;
  return s.current_mask();
}

struct StepResult {
  Session session;
  BinaryMask mask;
};

inline StepResult refine_step(Session s, std::span<const Click> new_clicks) {
  require_in_bounds(new_clicks, s.image.dims());
  std::vector<Click> all = s.clicks();
  all.insert(all.end(), new_clicks.begin(), new_clicks.end());
  BinaryMask m = run_pipeline(s, all, prior_for_next_step(s));
  s.steps.emplace_back(new_clicks.begin(), new_clicks.end());
  s.masks.push_back(m);
  s.updated_ms = now_ms();
  return {std::move(s), std::move(m)};
}

inline Session undo(Session s) {
  if (s.steps.empty()) throw Error(ErrorCode::conflict, "nothing to undo");
  s.steps.pop_back();
  s.masks.pop_back();
  s.updated_ms = now_ms();
  return s;
}

/// Re-runs every step from masks[0] on a fresh copy of the session.
inline Session replay(const Session& s) {
  Session fresh = s;
  fresh.steps.clear();
  fresh.masks.resize(1);
  for (const auto& step : s.steps) fresh = refine_step(std::move(fresh), step).session;
  return fresh;
}

}  // namespace clickseg::engine
