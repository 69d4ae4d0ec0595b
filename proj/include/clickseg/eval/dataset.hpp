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

// Dataset layout and evaluation reports.
//
//   <root>/<id>/image.ppm        <root>/<id>/frames/0000.ppm ...
//   <root>/<id>/gt.pgm           <root>/<id>/gts/0000.pgm ...
//   <root>/<id>/mask.pgm  (optional mask to correct)

#pragma once

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/pnm.hpp"
#include "clickseg/engine/store.hpp"
#include "clickseg/eval/protocol.hpp"
#include "clickseg/eval/synthetic.hpp"

namespace clickseg::eval {

namespace fs = std::filesystem;

struct ImageInstance {
  std::string id;
  Image image;
  BinaryMask gt;
  std::optional<BinaryMask> mask;
};

struct SequenceInstance {
  std::string id;
  std::vector<Image> frames;
  std::vector<BinaryMask> gts;
};

namespace detail {

inline std::vector<fs::path> instance_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::not_found, "no dataset at " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

inline std::size_t count_numbered(const fs::path& dir, const char* ext) {
  std::size_t n = 0;
  while (fs::exists(dir / engine::frame_name(n, ext))) ++n;
  return n;
}

}  // namespace detail

/// Instances with image.ppm and gt.pgm, sorted by id. Other directories are skipped.
inline std::vector<ImageInstance> load_image_dataset(const fs::path& root) {
  std::vector<ImageInstance> out;
  for (const auto& dir : detail::instance_dirs(root)) {
    if (!fs::exists(dir / "image.ppm") || !fs::exists(dir / "gt.pgm")) continue;
    ImageInstance inst{dir.filename().string(), read_image(dir / "image.ppm"), read_mask(dir / "gt.pgm"), {}};
    require_same_dims(inst.image, inst.gt, (inst.id + "/gt.pgm").c_str());
    if (fs::exists(dir / "mask.pgm")) {
      inst.mask = read_mask(dir / "mask.pgm");
      require_same_dims(inst.image, *inst.mask, (inst.id + "/mask.pgm").c_str());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

/// Instances with frames/ and gts/, sorted by id.
inline std::vector<SequenceInstance> load_sequence_dataset(const fs::path& root) {
  std::vector<SequenceInstance> out;
  for (const auto& dir : detail::instance_dirs(root)) {
    if (!fs::is_directory(dir / "frames") || !fs::is_directory(dir / "gts")) continue;
    SequenceInstance seq{dir.filename().string(), {}, {}};
    const std::size_t n = detail::count_numbered(dir / "frames", ".ppm");
    require(n >= 1, seq.id + ": no frames");
    require(detail::count_numbered(dir / "gts", ".pgm") == n, seq.id + ": frame and gt counts differ");
    for (std::size_t t = 0; t < n; ++t) {
      seq.frames.push_back(read_image(dir / "frames" / engine::frame_name(t, ".ppm")));
      seq.gts.push_back(read_mask(dir / "gts" / engine::frame_name(t, ".pgm")));
      require_same_dims(seq.frames.front(), seq.frames.back(), (seq.id + " frame").c_str());
      require_same_dims(seq.frames.front(), seq.gts.back(), (seq.id + " gt").c_str());
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline void write_image_instance(const fs::path& root, const ImageInstance& inst) {
  const fs::path dir = root / inst.id;
  fs::create_directories(dir);
  write_image(dir / "image.ppm", inst.image);
  write_mask(dir / "gt.pgm", inst.gt);
  if (inst.mask) write_mask(dir / "mask.pgm", *inst.mask);
}

inline void write_sequence_instance(const fs::path& root, const SequenceInstance& seq) {
  const fs::path dir = root / seq.id;
  fs::create_directories(dir / "frames");
  fs::create_directories(dir / "gts");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    write_image(dir / "frames" / engine::frame_name(t, ".ppm"), seq.frames[t]);
    write_mask(dir / "gts" / engine::frame_name(t, ".pgm"), seq.gts[t]);
  }
}

enum class SceneKind { two_color, textured, mixed };

inline SceneKind parse_scene_kind(const std::string& s) {
  if (s == "two_color") return SceneKind::two_color;
  if (s == "textured") return SceneKind::textured;
  if (s == "mixed") return SceneKind::mixed;
  fail("unknown scene kind \"" + s + "\"");
}

/// The corrupted-mask suite: scene i uses seed + i; mixed alternates two-color and textured.
/// Each GT is degraded to an IOU drawn from U[0.4, 0.6].
inline std::vector<ImageInstance> corrupted_mask_suite(std::size_t n, SceneKind kind, std::uint64_t seed,
                                                       Dims d = {64, 64}) {
  std::vector<ImageInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(seed + i);
    const bool textured = kind == SceneKind::textured || (kind == SceneKind::mixed && i % 2 == 1);
    Scene s = textured ? textured_scene(rng, d) : two_color_scene(rng, d);
    CorruptedMask c = corrupt_mask(s.gt, rng, uniform_real(rng, 0.4, 0.6));
    char id[32];
    std::snprintf(id, sizeof id, "scene%04zu", i);
    out.push_back({id, std::move(s.image), std::move(s.gt), std::move(c.mask)});
  }
  return out;
}

inline std::vector<RefinementCase> refinement_cases(std::span<const ImageInstance> instances) {
  std::vector<RefinementCase> out;
  for (const auto& inst : instances) {
    require(inst.mask.has_value(), inst.id + ": no mask.pgm to correct");
    out.push_back({inst.id, inst.image, *inst.mask, inst.gt});
  }
  return out;
}

/// One case per sequence: the GT-worst frame of `masks[i]` (the output of a propagation run).
inline std::vector<RefinementCase> worst_frame_cases(std::span<const SequenceInstance> seqs,
                                                     std::span<const std::vector<BinaryMask>> masks) {
  require(seqs.size() == masks.size(), "worst_frame_cases: one mask list per sequence");
  std::vector<RefinementCase> out;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto w = engine::worst_frame(masks[i], seqs[i].gts);
    out.push_back({seqs[i].id + "/" + engine::frame_name(w.index, ""), seqs[i].frames[w.index], masks[i][w.index],
                   seqs[i].gts[w.index]});
  }
  return out;
}

// Reports.

struct EvalRecord {
  std::string id;
  int clicks_used = 0;
  double final_iou = 0.0;
  std::vector<double> iou_trace;
};

struct EvalReport {
  std::string method;
  std::string dataset;
  double threshold = 0.0;
  std::vector<EvalRecord> records;

  double mean_clicks() const {
    if (records.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : records) s += r.clicks_used;
    return s / static_cast<double>(records.size());
  }

  double mean_iou() const {
    if (records.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : records) s += r.final_iou;
    return s / static_cast<double>(records.size());
  }
};

inline EvalRecord make_record(const std::string& id, const ClickRun& run) {
  return {id, run.clicks_used, run.iou_trace.empty() ? 0.0 : run.iou_trace.back(), run.iou_trace};
}

/// Runs the clicks-to-threshold protocol with the engine over every instance.
inline EvalReport evaluate_clicks(std::span<const ImageInstance> instances, const ProtocolConfig& cfg,
                                  const std::string& method, const std::string& dataset) {
  EvalReport rep{method, dataset, cfg.iou_threshold, {}};
  for (const auto& inst : instances) rep.records.push_back(make_record(inst.id, clicks_to_threshold(inst.image, inst.gt, cfg)));
  return rep;
}

inline void to_json(nlohmann::json& j, const EvalRecord& r) {
  j = nlohmann::json{
      {"id", r.id}, {"clicks_used", r.clicks_used}, {"final_iou", r.final_iou}, {"iou_trace", r.iou_trace}};
}

inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"method", r.method},           {"dataset", r.dataset},     {"threshold", r.threshold},
                     {"mean_clicks", r.mean_clicks()}, {"mean_iou", r.mean_iou()}, {"records", r.records}};
}

inline std::string csv_header() { return "method,dataset,threshold,mean_clicks,mean_iou\n"; }

inline std::string csv_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(6);
  os << r.method << ',' << r.dataset << ',' << r.threshold << ',' << r.mean_clicks() << ',' << r.mean_iou() << '\n';
  return os.str();
}

}  // namespace clickseg::eval
