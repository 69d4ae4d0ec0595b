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

// Video sessions: first-frame propagation, worst-frame selection, per-frame correction.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickseg/core/metrics.hpp"
#include "clickseg/engine/session.hpp"
#include "clickseg/predict.hpp"

namespace clickseg::engine {

struct SequenceSession {
  std::string id;
  std::vector<Image> frames;
  std::vector<BinaryMask> masks;  // empty until propagated
  std::optional<BinaryMask> first_mask;
  std::string first_frame_session;  // id of the session that produced first_mask, if any
  std::map<std::size_t, Session> refined;
  SessionConfig frame_config;  // used for per-frame correction sessions
  PropagationParams propagation;
  std::size_t components = 5;
  std::uint64_t seed = 0;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

inline SequenceSession make_sequence(std::string id, std::vector<Image> frames, SessionConfig frame_config = {}) {
  require(!frames.empty(), "sequence: needs at least one frame");
  for (const Image& f : frames) require_same_dims(frames[0], f, "sequence frame");
  SequenceSession s;
  s.id = std::move(id);
  s.frames = std::move(frames);
  s.frame_config = std::move(frame_config);
  s.created_ms = s.updated_ms = now_ms();
  return s;
}

inline SequenceSession set_first_frame(SequenceSession seq, BinaryMask mask, std::string session_id = {}) {
  require_same_dims(seq.frames[0], mask, "first-frame mask");
  seq.first_mask = std::move(mask);
  seq.first_frame_session = std::move(session_id);
  seq.updated_ms = now_ms();
  return seq;
}

inline SequenceSession segment_sequence(SequenceSession seq) {
  if (!seq.first_mask) throw Error(ErrorCode::conflict, "sequence: first-frame mask not set");
  const AppearanceModel model = fit_first_frame_model(seq.frames[0], *seq.first_mask, seq.components, 10, seq.seed);
  seq.masks = propagate_sequence(seq.frames, model, *seq.first_mask, seq.propagation);
  seq.refined.clear();
  seq.updated_ms = now_ms();
  return seq;
}

struct WorstFrame {
  std::size_t index = 0;
  double score = 0.0;  // IOU vs GT, or vs the previous mask without GT
};

/// With GT: argmin IOU(mask_t, gt_t). Without: argmin IOU(mask_t, mask_{t-1}) over t >= 1.
/// Ties go to the lowest index.
inline WorstFrame worst_frame(std::span<const BinaryMask> masks, std::span<const BinaryMask> gt = {}) {
  require(!masks.empty(), "worst_frame: masks not computed");
  WorstFrame best{0, 2.0};
  if (!gt.empty()) {
    require(gt.size() == masks.size(), "worst_frame: gt count does not match masks");
    for (std::size_t t = 0; t < masks.size(); ++t) {
      const double v = iou(masks[t], gt[t]);
      if (v < best.score) best = {t, v};
    }
    return best;
  }
  require(masks.size() >= 2, "worst_frame: self-consistency needs at least two frames");
  for (std::size_t t = 1; t < masks.size(); ++t) {
    const double v = iou(masks[t], masks[t - 1]);
    if (v < best.score) best = {t, v};
  }
  return best;
}

inline WorstFrame worst_frame(const SequenceSession& seq, std::span<const BinaryMask> gt = {}) {
  if (seq.masks.empty()) throw Error(ErrorCode::conflict, "worst_frame: sequence not propagated");
  return worst_frame(std::span<const BinaryMask>(seq.masks), gt);
}

/// Applies one refinement step to frame t, opening a session seeded with the current mask when
/// none exists. With `repropagate`, frames after t are re-segmented from a model refit on the
/// corrected frame, which also becomes the temporal anchor.
inline SequenceSession refine_frame(SequenceSession seq, std::size_t t, std::span<const Click> clicks,
                                    bool repropagate = false) {
  if (seq.masks.empty()) throw Error(ErrorCode::conflict, "refine_frame: sequence not propagated");
  if (t >= seq.frames.size()) throw Error(ErrorCode::not_found, "refine_frame: frame index out of range");
  auto it = seq.refined.find(t);
  Session s = it != seq.refined.end()
                  ? it->second
                  : make_session(seq.id + "/frame/" + std::to_string(t), seq.frames[t], seq.frame_config, seq.masks[t]);
  StepResult r = refine_step(std::move(s), clicks);
  seq.masks[t] = r.mask;
  seq.refined.insert_or_assign(t, std::move(r.session));
  if (repropagate && t + 1 < seq.frames.size() && count_foreground(seq.masks[t]) > 0 &&
      count_foreground(seq.masks[t]) < seq.masks[t].size()) {
    const AppearanceModel model = fit_first_frame_model(seq.frames[t], seq.masks[t], seq.components, 10, seq.seed);
    const std::span<const Image> tail(seq.frames.begin() + static_cast<std::ptrdiff_t>(t), seq.frames.end());
    const auto out = propagate_sequence(tail, model, seq.masks[t], seq.propagation);
    for (std::size_t k = 1; k < out.size(); ++k) seq.masks[t + k] = out[k];
    seq.refined.erase(seq.refined.upper_bound(t), seq.refined.end());
  }
  seq.updated_ms = now_ms();
  return seq;
}

}  // namespace clickseg::engine
