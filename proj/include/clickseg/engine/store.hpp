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

// On-disk session format.
//
//   session/                      sequence/
//     image.ppm                     frames/0000.ppm ...
//     clicks.json                   framemasks/0000.pgm ...
//     masks/0000.pgm ...            first_mask.pgm        (optional)
//     meta.json                     frame_sessions/0003/  (session dirs)
//                                   meta.json

#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/pnm.hpp"
#include "clickseg/core/rle.hpp"
#include "clickseg/engine/sequence.hpp"
#include "clickseg/engine/session.hpp"

namespace clickseg::engine {

namespace fs = std::filesystem;

inline std::string frame_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu%s", i, ext);
  return buf;
}

inline void to_json(nlohmann::json& j, const SessionConfig& c) {
  j = nlohmann::json{
      {"backend", c.backend}, {"encoding", c.encoding}, {"crf", c.crf}, {"use_prior_mask", c.use_prior_mask}};
}

inline void from_json(const nlohmann::json& j, SessionConfig& c) {
  c = SessionConfig{};
  if (j.contains("backend")) c.backend = j.at("backend").get<BackendSpec>();
  if (j.contains("encoding")) c.encoding = j.at("encoding").get<EncodingConfig>();
  if (j.contains("crf")) c.crf = j.at("crf").get<crf::CrfParams>();
  if (j.contains("use_prior_mask")) {
    require(j.at("use_prior_mask").is_boolean(), "session config: use_prior_mask must be a boolean");
    c.use_prior_mask = j.at("use_prior_mask").get<bool>();
  }
}

/// Clicks in order, each tagged with the step that added it.
inline nlohmann::json clicks_json(const Session& s) {
  auto out = nlohmann::json::array();
  for (std::size_t k = 0; k < s.steps.size(); ++k) {
    for (const Click& c : s.steps[k]) {
      nlohmann::json e = c;
      e["step"] = k;
      out.push_back(e);
    }
  }
  return out;
}

namespace detail {

inline nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::exception& e) {
    fail(p.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_file(p, j.dump(2) + "\n"); }

// Writes into a sibling temp directory, then swaps it in.
template <class F>
void write_dir(const fs::path& dir, F&& fill) {
  const fs::path tmp = dir.string() + ".tmp";
  const fs::path old = dir.string() + ".old";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  fill(tmp);
  fs::remove_all(old);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old);
}

inline void fill_session_dir(const fs::path& dir, const Session& s) {
  write_image(dir / "image.ppm", s.image);
  write_json(dir / "clicks.json", clicks_json(s));
  fs::create_directories(dir / "masks");
  for (std::size_t k = 0; k < s.masks.size(); ++k) write_mask(dir / "masks" / frame_name(k, ".pgm"), s.masks[k]);
  nlohmann::json meta{{"id", s.id},
                      {"config", s.config},
                      {"step_count", s.steps.size()},
                      {"has_initial_mask", s.has_initial_mask},
                      {"seed_clicks", s.seed_clicks},
                      {"created_ms", s.created_ms},
                      {"updated_ms", s.updated_ms}};
  if (s.gt) meta["gt"] = rle_encode(*s.gt);
  write_json(dir / "meta.json", meta);
}

}  // namespace detail

inline void save_session(const fs::path& dir, const Session& s) {
  detail::write_dir(dir, [&](const fs::path& tmp) { detail::fill_session_dir(tmp, s); });
}

inline Session load_session(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::not_found, "no session at " + dir.string());
  const nlohmann::json meta = detail::read_json(dir / "meta.json");
  Session s;
  try {
    s.id = meta.at("id").get<std::string>();
    s.config = meta.at("config").get<SessionConfig>();
    s.has_initial_mask = meta.at("has_initial_mask").get<bool>();
    s.seed_clicks = meta.value("seed_clicks", nlohmann::json::array()).get<std::vector<Click>>();
    s.created_ms = meta.at("created_ms").get<std::int64_t>();
    s.updated_ms = meta.at("updated_ms").get<std::int64_t>();
    if (meta.contains("gt")) s.gt = rle_decode(meta.at("gt").get<RleMask>());
    const auto steps = meta.at("step_count").get<std::size_t>();
    s.steps.resize(steps);
    for (const auto& e : detail::read_json(dir / "clicks.json")) {
      const auto k = e.at("step").get<std::size_t>();
      require(k < steps, "clicks.json: step index out of range");
      s.steps[k].push_back(e.get<Click>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(dir.string() + ": " + e.what());
  }
  s.image = read_image(dir / "image.ppm");
  for (std::size_t k = 0; k <= s.steps.size(); ++k) {
    s.masks.push_back(read_mask(dir / "masks" / frame_name(k, ".pgm")));
    require_same_dims(s.image, s.masks.back(), "stored mask");
  }
  require_in_bounds(s.clicks(), s.image.dims());
  return s;
}

inline void save_sequence(const fs::path& dir, const SequenceSession& q) {
  detail::write_dir(dir, [&](const fs::path& tmp) {
    fs::create_directories(tmp / "frames");
    for (std::size_t t = 0; t < q.frames.size(); ++t) write_image(tmp / "frames" / frame_name(t, ".ppm"), q.frames[t]);
    fs::create_directories(tmp / "framemasks");
    for (std::size_t t = 0; t < q.masks.size(); ++t)
      write_mask(tmp / "framemasks" / frame_name(t, ".pgm"), q.masks[t]);
    if (q.first_mask) write_mask(tmp / "first_mask.pgm", *q.first_mask);
    auto refined = nlohmann::json::array();
    for (const auto& [t, s] : q.refined) {
      refined.push_back(t);
      const fs::path sub = tmp / "frame_sessions" / frame_name(t, "");
      fs::create_directories(sub);
      detail::fill_session_dir(sub, s);
    }
    detail::write_json(tmp / "meta.json", nlohmann::json{{"id", q.id},
                                                         {"frame_count", q.frames.size()},
                                                         {"propagated", !q.masks.empty()},
                                                         {"first_frame_session", q.first_frame_session},
                                                         {"frame_config", q.frame_config},
                                                         {"propagation", q.propagation},
                                                         {"components", q.components},
                                                         {"seed", q.seed},
                                                         {"refined", refined},
                                                         {"created_ms", q.created_ms},
                                                         {"updated_ms", q.updated_ms}});
  });
}

inline SequenceSession load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::not_found, "no sequence at " + dir.string());
  const nlohmann::json meta = detail::read_json(dir / "meta.json");
  SequenceSession q;
  std::vector<std::size_t> refined;
  std::size_t frames = 0;
  bool propagated = false;
  try {
    q.id = meta.at("id").get<std::string>();
    frames = meta.at("frame_count").get<std::size_t>();
    propagated = meta.at("propagated").get<bool>();
    q.first_frame_session = meta.value("first_frame_session", std::string{});
    q.frame_config = meta.at("frame_config").get<SessionConfig>();
    q.propagation = meta.at("propagation").get<PropagationParams>();
    q.components = meta.at("components").get<std::size_t>();
    q.seed = meta.at("seed").get<std::uint64_t>();
    refined = meta.at("refined").get<std::vector<std::size_t>>();
    q.created_ms = meta.at("created_ms").get<std::int64_t>();
    q.updated_ms = meta.at("updated_ms").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(dir.string() + ": " + e.what());
  }
  require(frames >= 1, "sequence meta: frame_count must be >= 1");
  for (std::size_t t = 0; t < frames; ++t) q.frames.push_back(read_image(dir / "frames" / frame_name(t, ".ppm")));
  if (propagated)
    for (std::size_t t = 0; t < frames; ++t)
      q.masks.push_back(read_mask(dir / "framemasks" / frame_name(t, ".pgm")));
  if (fs::exists(dir / "first_mask.pgm")) q.first_mask = read_mask(dir / "first_mask.pgm");
  for (std::size_t t : refined) q.refined.emplace(t, load_session(dir / "frame_sessions" / frame_name(t, "")));
  return q;
}

}  // namespace clickseg::engine
