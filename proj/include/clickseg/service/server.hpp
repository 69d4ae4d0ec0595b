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

// HTTP API over the engine, persisted to the session store.

#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

// Eigen before httplib: <resolv.h> defines a `_res` macro that collides with Eigen internals.
#include "clickseg/engine/store.hpp"
#include "clickseg/service/base64.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace clickseg::service {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kDefaultPort = 8790;

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_request: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict: return 409;
    case ErrorCode::internal: return 500;
  }
  return 500;
}

inline json error_body(ErrorCode code, const std::string& message) {
  return {{"error", {{"code", std::string(to_string(code))}, {"message", message}, {"http_status", http_status(code)}}}};
}

struct ServiceOptions {
  fs::path data_dir = "clickseg-data";
  double stroke_spacing = 5.0;  // px between clicks sampled along a stroke
  int step_delay_ms = 0;        // debugging: hold the session lock this long during a step
};

/// CLICKSEG_DATA_DIR when set, else `fallback`.
inline fs::path resolve_data_dir(const fs::path& fallback) {
  const char* env = std::getenv("CLICKSEG_DATA_DIR");
  return env && *env ? fs::path(env) : fallback;
}

/// Session and sequence registry. Every method is callable concurrently; mutations of one
/// session or sequence are serialized and a second concurrent mutation fails with conflict.
class Service {
 public:
  explicit Service(ServiceOptions opt) : opt_(std::move(opt)) {
    require(opt_.stroke_spacing > 0.0, "stroke_spacing must be > 0");
    fs::create_directories(opt_.data_dir / "sessions");
    fs::create_directories(opt_.data_dir / "sequences");
    reload();
  }

  const ServiceOptions& options() const { return opt_; }

  // POST /v1/sessions
  json create_session(const json& body) {
    const Image img = decode_ppm(base64_decode(string_field(body, "image")));
    const engine::SessionConfig cfg = parse<engine::SessionConfig>(body);
    std::optional<BinaryMask> initial;
    if (body.contains("initial_mask")) initial = parse_mask(body.at("initial_mask"), img.dims(), "initial_mask");
    const std::string id = new_id("s");
    engine::Session s = engine::make_session(id, img, cfg, initial);
    if (body.contains("gt")) s.gt = parse_mask(body.at("gt"), img.dims(), "gt");
    if (body.contains("seed_clicks")) {
      s.seed_clicks = parse<std::vector<Click>>(body.at("seed_clicks"));
      require_in_bounds(s.seed_clicks, img.dims());
    }
    engine::save_session(session_dir(id), s);
    std::unique_lock lk(map_mu_);
    sessions_.emplace(id, std::make_shared<Entry<engine::Session>>(std::move(s)));
    return {{"session_id", id}};
  }

  // POST /v1/sessions/{id}/interactions
  json interact(const std::string& id, const json& body) {
    auto e = find(sessions_, id, "session");
    return with_lock(*e, [&](engine::Session& s) {
      const std::vector<Click> clicks = interactions(body, s.image.dims());
      delay();
      auto r = engine::refine_step(s, clicks);
      engine::save_session(session_dir(id), r.session);
      s = std::move(r.session);
      return mask_response(s);
    });
  }

  // POST /v1/sessions/{id}/undo
  json undo(const std::string& id) {
    auto e = find(sessions_, id, "session");
    return with_lock(*e, [&](engine::Session& s) {
      engine::Session next = engine::undo(s);
      engine::save_session(session_dir(id), next);
      s = std::move(next);
      return mask_response(s);
    });
  }

  // GET /v1/sessions/{id}
  json get_session(const std::string& id) {
    auto e = find(sessions_, id, "session");
    std::lock_guard lk(e->mu);
    const engine::Session& s = e->value;
    json out{{"session_id", s.id},
             {"width", s.image.width()},
             {"height", s.image.height()},
             {"step_count", s.step_count()},
             {"clicks", engine::clicks_json(s)},
             {"mask", rle_encode(s.current_mask())},
             {"config", s.config},
             {"has_gt", s.gt.has_value()},
             {"created_ms", s.created_ms},
             {"updated_ms", s.updated_ms}};
    if (s.gt) out["iou_hint"] = iou(s.current_mask(), *s.gt);
    return out;
  }

  // POST /v1/sequences
  json create_sequence(std::vector<Image> frames, const json& config) {
    engine::SessionConfig cfg = parse<engine::SessionConfig>(config);
    const std::string id = new_id("q");
    engine::SequenceSession q = engine::make_sequence(id, std::move(frames), cfg);
    if (config.contains("propagation")) q.propagation = parse<PropagationParams>(config.at("propagation"));
    if (config.contains("seed")) q.seed = parse<std::uint64_t>(config.at("seed"));
    engine::save_sequence(sequence_dir(id), q);
    const std::size_t n = q.frames.size();
    std::unique_lock lk(map_mu_);
    sequences_.emplace(id, std::make_shared<Entry<engine::SequenceSession>>(std::move(q)));
    return {{"sequence_id", id}, {"frame_count", n}};
  }

  // POST /v1/sequences/{id}/first-frame/{session_id}
  json set_first_frame(const std::string& id, const std::string& session_id) {
    auto q = find(sequences_, id, "sequence");
    auto s = find(sessions_, session_id, "session");
    BinaryMask mask;
    {
      std::lock_guard lk(s->mu);
      mask = s->value.current_mask();
    }
    return with_lock(*q, [&](engine::SequenceSession& seq) {
      engine::SequenceSession next = engine::set_first_frame(seq, std::move(mask), session_id);
      engine::save_sequence(sequence_dir(id), next);
      seq = std::move(next);
      return json{{"sequence_id", id}, {"first_frame_session", session_id}};
    });
  }

  // POST /v1/sequences/{id}/propagate
  json propagate(const std::string& id) {
    auto q = find(sequences_, id, "sequence");
    return with_lock(*q, [&](engine::SequenceSession& seq) {
      delay();
      engine::SequenceSession next = engine::segment_sequence(seq);
      engine::save_sequence(sequence_dir(id), next);
      seq = std::move(next);
      return masks_response(seq);
    });
  }

  // GET /v1/sequences/{id}/worst-frame
  json worst_frame(const std::string& id) {
    auto q = find(sequences_, id, "sequence");
    std::lock_guard lk(q->mu);
    if (q->value.masks.empty()) throw Error(ErrorCode::conflict, "sequence has not been propagated");
    const engine::WorstFrame w = engine::worst_frame(q->value);
    return {{"index", w.index}, {"score", w.score}};
  }

  // POST /v1/sequences/{id}/frames/{t}/interactions
  json frame_interact(const std::string& id, std::size_t t, const json& body) {
    auto q = find(sequences_, id, "sequence");
    const bool repropagate = body.contains("repropagate") && parse<bool>(body.at("repropagate"));
    return with_lock(*q, [&](engine::SequenceSession& seq) {
      if (t >= seq.frames.size()) throw Error(ErrorCode::not_found, "no frame " + std::to_string(t));
      const std::vector<Click> clicks = interactions(body, seq.frames[t].dims());
      delay();
      engine::SequenceSession next = engine::refine_frame(seq, t, clicks, repropagate);
      engine::save_sequence(sequence_dir(id), next);
      seq = std::move(next);
      json out{{"index", t}, {"mask", rle_encode(seq.masks[t])}};
      if (repropagate) out["masks"] = masks_response(seq).at("masks");
      return out;
    });
  }

  json get_sequence(const std::string& id) {
    auto q = find(sequences_, id, "sequence");
    std::lock_guard lk(q->mu);
    const engine::SequenceSession& seq = q->value;
    json out = masks_response(seq);
    out["sequence_id"] = seq.id;
    out["frame_count"] = seq.frames.size();
    out["first_frame_session"] = seq.first_frame_session;
    out["has_first_mask"] = seq.first_mask.has_value();
    return out;
  }

  std::size_t session_count() const {
    std::shared_lock lk(map_mu_);
    return sessions_.size();
  }

 private:
  template <class T>
  struct Entry {
    explicit Entry(T v) : value(std::move(v)) {}
    std::mutex mu;
    T value;
  };

  template <class T>
  using Registry = std::map<std::string, std::shared_ptr<Entry<T>>>;

  template <class T>
  static T parse(const json& j) {
    try {
      return j.get<T>();
    } catch (const json::exception& e) {
      fail(e.what());
    }
  }

  static std::string string_field(const json& body, const char* key) {
    require(body.is_object() && body.contains(key) && body.at(key).is_string(),
            std::string("missing string field \"") + key + "\"");
    return body.at(key).get<std::string>();
  }

  static BinaryMask parse_mask(const json& j, Dims d, const char* what) {
    BinaryMask m = rle_decode(parse<RleMask>(j));
    require_same_dims(m, Raster<std::uint8_t>(d), what);
    return m;
  }

  std::vector<Click> interactions(const json& body, Dims d) const {
    require(body.is_object(), "body must be a JSON object");
    std::vector<Click> clicks;
    if (body.contains("clicks")) clicks = parse<std::vector<Click>>(body.at("clicks"));
    if (body.contains("strokes")) {
      for (const Stroke& s : parse<std::vector<Stroke>>(body.at("strokes"))) {
        const auto pts = rasterize_stroke(s, opt_.stroke_spacing);
        clicks.insert(clicks.end(), pts.begin(), pts.end());
      }
    }
    require(!clicks.empty(), "interactions need at least one click or stroke");
    require_in_bounds(clicks, d);
    return clicks;
  }

  static json mask_response(const engine::Session& s) {
    json out{{"session_id", s.id}, {"step_count", s.step_count()}, {"mask", rle_encode(s.current_mask())}};
    if (s.gt) out["iou_hint"] = iou(s.current_mask(), *s.gt);
    return out;
  }

  static json masks_response(const engine::SequenceSession& seq) {
    json masks = json::array();
    for (const auto& m : seq.masks) masks.push_back(rle_encode(m));
    return {{"masks", masks}};
  }

  template <class T>
  std::shared_ptr<Entry<T>> find(const Registry<T>& reg, const std::string& id, const char* kind) const {
    std::shared_lock lk(map_mu_);
    const auto it = reg.find(id);
    if (it == reg.end()) throw Error(ErrorCode::not_found, std::string("no ") + kind + " \"" + id + "\"");
    return it->second;
  }

  template <class T, class F>
  static json with_lock(Entry<T>& e, F&& f) {
    std::unique_lock lk(e.mu, std::try_to_lock);
    if (!lk.owns_lock()) throw Error(ErrorCode::conflict, "another request is modifying this resource");
    return f(e.value);
  }

  void delay() const {
    if (opt_.step_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opt_.step_delay_ms));
  }

  std::string new_id(const char* prefix) {
    std::lock_guard lk(id_mu_);
    static constexpr char hex[] = "0123456789abcdef";
    for (;;) {
      std::string id = prefix;
      for (int i = 0; i < 12; ++i) id += hex[id_rng_() & 15];
      if (!fs::exists(session_dir(id)) && !fs::exists(sequence_dir(id))) return id;
    }
  }

  fs::path session_dir(const std::string& id) const { return opt_.data_dir / "sessions" / id; }
  fs::path sequence_dir(const std::string& id) const { return opt_.data_dir / "sequences" / id; }

  static bool is_staging(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".tmp" || ext == ".old";
  }

  void reload() {
    for (const auto& e : fs::directory_iterator(opt_.data_dir / "sessions")) {
      if (!e.is_directory() || is_staging(e.path())) continue;
      engine::Session s = engine::load_session(e.path());
      const std::string id = e.path().filename().string();
      sessions_.emplace(id, std::make_shared<Entry<engine::Session>>(std::move(s)));
    }
    for (const auto& e : fs::directory_iterator(opt_.data_dir / "sequences")) {
      if (!e.is_directory() || is_staging(e.path())) continue;
      engine::SequenceSession q = engine::load_sequence(e.path());
      const std::string id = e.path().filename().string();
      sequences_.emplace(id, std::make_shared<Entry<engine::SequenceSession>>(std::move(q)));
    }
  }

  ServiceOptions opt_;
  mutable std::shared_mutex map_mu_;
  Registry<engine::Session> sessions_;
  Registry<engine::SequenceSession> sequences_;
  std::mutex id_mu_;
  std::mt19937_64 id_rng_{std::random_device{}()};
};

namespace detail {

inline void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON body: ") + e.what());
  }
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, f(req));
    } catch (const Error& e) {
      send_json(res, error_body(e.code(), e.what()), http_status(e.code()));
    } catch (const std::exception& e) {
      send_json(res, error_body(ErrorCode::internal, e.what()), 500);
    }
  };
}

inline std::size_t parse_index(const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw Error(ErrorCode::not_found, "no frame \"" + s + "\"");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Registers every /v1 route on `srv`; when `static_dir` is nonempty it is served at `/`.
inline void mount(httplib::Server& srv, Service& svc, const fs::path& static_dir = {}) {
  using detail::guarded;
  using Req = httplib::Request;
  srv.Get("/v1/health", guarded([](const Req&) { return json{{"status", "ok"}}; }));
  srv.Post("/v1/sessions", guarded([&svc](const Req& r) { return svc.create_session(detail::parse_body(r)); }));
  srv.Post(R"(/v1/sessions/([^/]+)/interactions)",
           guarded([&svc](const Req& r) { return svc.interact(r.matches[1], detail::parse_body(r)); }));
  srv.Post(R"(/v1/sessions/([^/]+)/undo)", guarded([&svc](const Req& r) { return svc.undo(r.matches[1]); }));
  srv.Get(R"(/v1/sessions/([^/]+))", guarded([&svc](const Req& r) { return svc.get_session(r.matches[1]); }));
  srv.Post("/v1/sequences", guarded([&svc](const Req& r) {
             require(r.is_multipart_form_data(), "sequences expect multipart/form-data with \"frames\" parts");
             std::vector<Image> frames;
             for (const auto& f : r.get_file_values("frames")) frames.push_back(decode_ppm(f.content));
             require(!frames.empty(), "no \"frames\" parts");
             json config = json::object();
             if (r.has_file("config")) {
               try {
                 config = json::parse(r.get_file_value("config").content);
               } catch (const json::exception& e) {
                 fail(std::string("invalid config part: ") + e.what());
               }
             }
             return svc.create_sequence(std::move(frames), config);
           }));
  srv.Get(R"(/v1/sequences/([^/]+))", guarded([&svc](const Req& r) { return svc.get_sequence(r.matches[1]); }));
  srv.Post(R"(/v1/sequences/([^/]+)/first-frame/([^/]+))",
           guarded([&svc](const Req& r) { return svc.set_first_frame(r.matches[1], r.matches[2]); }));
  srv.Post(R"(/v1/sequences/([^/]+)/propagate)", guarded([&svc](const Req& r) { return svc.propagate(r.matches[1]); }));
  srv.Get(R"(/v1/sequences/([^/]+)/worst-frame)",
          guarded([&svc](const Req& r) { return svc.worst_frame(r.matches[1]); }));
  srv.Post(R"(/v1/sequences/([^/]+)/frames/([^/]+)/interactions)", guarded([&svc](const Req& r) {
             return svc.frame_interact(r.matches[1], detail::parse_index(r.matches[2]), detail::parse_body(r));
           }));
  if (!static_dir.empty()) srv.set_mount_point("/", static_dir.string());
  // Fills bodies for statuses raised by the HTTP layer itself (unknown route, oversized payload).
  srv.set_error_handler([](const Req& r, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      detail::send_json(res, error_body(ErrorCode::not_found, "no route " + r.method + " " + r.path), 404);
      return;
    }
    const ErrorCode code = res.status < 500 ? ErrorCode::bad_request : ErrorCode::internal;
    json body = error_body(code, std::string("HTTP ") + std::to_string(res.status) + " " + httplib::status_message(res.status));
    body["error"]["http_status"] = res.status;
    detail::send_json(res, body, res.status);
  });
}

}  // namespace clickseg::service
