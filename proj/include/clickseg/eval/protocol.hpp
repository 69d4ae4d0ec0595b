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

// Simulated-user protocols: clicks to reach an IOU threshold, and correction of bad masks.

#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/metrics.hpp"
#include "clickseg/engine/session.hpp"
#include "clickseg/graphcut/grabcut.hpp"
#include "clickseg/simulate.hpp"

namespace clickseg::eval {

/// Pixel of `region` farthest from any non-region pixel (the image border counts as outside).
/// Ties go to the first pixel in row-major order.
inline std::optional<Point> pole_of_inaccessibility(const BinaryMask& region) {
  if (count_foreground(region) == 0) return std::nullopt;
  const RealMap d = interior_distance(region, true);
  std::size_t best = region.size();
  for (std::size_t i = 0; i < region.size(); ++i)
    if (region[i] && (best == region.size() || d[i] > d[best])) best = i;
  return Point{static_cast<int>(best % region.width()), static_cast<int>(best / region.width())};
}

inline Click first_click(const BinaryMask& gt) {
  const auto p = pole_of_inaccessibility(gt);
  require(p.has_value(), "first_click: empty ground truth");
  return {p->x, p->y, Polarity::positive};
}

/// Click at the pole of the largest 4-connected error component; nullopt when pred == gt.
inline std::optional<Click> correction_click(const BinaryMask& pred, const BinaryMask& gt) {
  const Components cc = connected_components(mask_xor(pred, gt), Connectivity::four);
  if (cc.count() == 0) return std::nullopt;
  const auto p = pole_of_inaccessibility(cc.mask(cc.largest()));
  return Click{p->x, p->y, gt.at(p->x, p->y) ? Polarity::positive : Polarity::negative};
}

enum class Placement { pole, sampler };

struct ProtocolConfig {
  double iou_threshold = 0.9;
  int max_clicks = 20;
  engine::SessionConfig session;  // backend and configs for engine-driven runs
  Placement placement = Placement::pole;
  std::uint64_t seed = 0;  // used by Placement::sampler

  void validate() const {
    require(iou_threshold > 0.0 && iou_threshold <= 1.0, "protocol: iou_threshold must be in (0,1]");
    require(max_clicks >= 1, "protocol: max_clicks must be >= 1");
  }
};

/// Produces the next mask from every click so far and the current mask.
using Segmenter = std::function<BinaryMask(std::span<const Click> clicks, const BinaryMask& current)>;

struct ClickRun {
  int clicks_used = 0;
  bool reached = false;
  std::vector<double> iou_trace;
  std::vector<Click> clicks;
  std::vector<bool> click_in_error;  // each click lay in the error region when placed
};

inline std::optional<Click> place_click(const BinaryMask& pred, const BinaryMask& gt, const ProtocolConfig& cfg,
                                        std::size_t index) {
  if (cfg.placement == Placement::pole) return correction_click(pred, gt);
  SamplingConfig sc;
  sc.rng_seed = cfg.seed + index;
  const auto v = sample_correction_clicks(pred, gt, 1, sc);
  if (v.empty()) return std::nullopt;
  return v.front();
}

inline ClickRun clicks_to_threshold(const BinaryMask& gt, const Segmenter& segment, const ProtocolConfig& cfg) {
  cfg.validate();
  require(count_foreground(gt) > 0, "clicks_to_threshold: empty ground truth");
  ClickRun run;
  BinaryMask pred(gt.dims());
  for (int k = 0; k < cfg.max_clicks; ++k) {
    const std::optional<Click> c = k == 0 ? std::optional<Click>(first_click(gt)) : place_click(pred, gt, cfg, k);
    if (!c) break;  // pred == gt, already above any threshold
    run.click_in_error.push_back(k == 0 ? gt.at(c->x, c->y) != pred.at(c->x, c->y)
                                        : mask_xor(pred, gt).at(c->x, c->y) != 0);
    run.clicks.push_back(*c);
    pred = segment(run.clicks, pred);
    const double v = iou(pred, gt);
    run.iou_trace.push_back(v);
    if (v >= cfg.iou_threshold) {
      run.reached = true;
      break;
    }
  }
  run.clicks_used = run.reached ? static_cast<int>(run.iou_trace.size()) : cfg.max_clicks;
  return run;
}

/// One engine session per run; each click is one refinement step.
inline Segmenter engine_segmenter(const Image& img, const engine::SessionConfig& cfg) {
  auto session = std::make_shared<engine::Session>(engine::make_session("eval", img, cfg));
  return [session](std::span<const Click> clicks, const BinaryMask&) {
    const std::span<const Click> fresh = clicks.subspan(session->clicks().size());
    auto r = engine::refine_step(std::move(*session), fresh);
    *session = std::move(r.session);
    return r.mask;
  };
}

inline ClickRun clicks_to_threshold(const Image& img, const BinaryMask& gt, const ProtocolConfig& cfg) {
  require_same_dims(img, gt, "clicks_to_threshold");
  return clicks_to_threshold(gt, engine_segmenter(img, cfg.session), cfg);
}

/// GrabCut with a fixed box and every click as a hard constraint.
inline Segmenter grabcut_segmenter(const Image& img, const graphcut::BoxPrior& box,
                                   const graphcut::GrabCutParams& prm = {}) {
  return [img, box, prm](std::span<const Click> clicks, const BinaryMask&) {
    return graphcut::grabcut_segment(img, box, clicks, std::nullopt, prm);
  };
}

// Correction of bad masks.

enum class RefineMethod { prior_mask, no_prior, grabcut };

inline std::string to_string(RefineMethod m) {
  switch (m) {
    case RefineMethod::prior_mask:
      return "prior_mask";
    case RefineMethod::no_prior:
      return "no_prior";
    case RefineMethod::grabcut:
      return "grabcut";
  }
  return "unknown";
}

inline RefineMethod parse_refine_method(const std::string& s) {
  if (s == "prior_mask" || s == "ours") return RefineMethod::prior_mask;
  if (s == "no_prior" || s == "ifcn") return RefineMethod::no_prior;
  if (s == "grabcut") return RefineMethod::grabcut;
  fail("unknown refinement method \"" + s + "\"");
}

struct RefinementCase {
  std::string id;
  Image image;
  BinaryMask current;  // the mask to correct
  BinaryMask gt;
};

struct RefinementConfig {
  std::vector<int> k_clicks = {1, 4, 10};
  std::vector<RefineMethod> methods = {RefineMethod::prior_mask, RefineMethod::no_prior, RefineMethod::grabcut};
  engine::SessionConfig session;  // backend for the engine arms; use_prior_mask is set per arm
  graphcut::GrabCutParams grabcut;
  int box_margin = 10;

  void validate() const {
    require(!k_clicks.empty(), "refinement: k_clicks must be nonempty");
    for (int k : k_clicks) require(k >= 0, "refinement: k must be >= 0");
    require(!methods.empty(), "refinement: methods must be nonempty");
    require(box_margin >= 0, "refinement: box_margin must be >= 0");
  }
};

/// IOU after each of the first `max_k` correction clicks (index k-1).
inline std::vector<double> correct_case(const RefinementCase& c, RefineMethod method, int max_k,
                                        const RefinementConfig& cfg) {
  std::vector<double> trace;
  BinaryMask pred = c.current;
  std::vector<Click> clicks;
  std::optional<engine::Session> session;
  if (method != RefineMethod::grabcut) {
    engine::SessionConfig sc = cfg.session;
    sc.use_prior_mask = method == RefineMethod::prior_mask;
    session = engine::make_session(c.id, c.image, sc, c.current);
    if (method == RefineMethod::no_prior && count_foreground(c.current) > 0) {
      const Components cc = connected_components(c.current, Connectivity::four);
      const Point p = *pole_of_inaccessibility(cc.mask(cc.largest()));
      session->seed_clicks.push_back({p.x, p.y, Polarity::positive});
    }
  }
  for (int k = 0; k < max_k; ++k) {
    const auto click = correction_click(pred, c.gt);
    if (!click) {
      trace.push_back(1.0);
      continue;
    }
    clicks.push_back(*click);
    if (session) {
      auto r = engine::refine_step(std::move(*session), std::span<const Click>(&clicks.back(), 1));
      session = std::move(r.session);
      pred = std::move(r.mask);
    } else {
      bool positive = false;
      for (const Click& q : clicks) positive = positive || q.polarity == Polarity::positive;
      const graphcut::BoxPrior box = count_foreground(pred) > 0 || positive
                                         ? graphcut::heuristic_box(pred, clicks, cfg.box_margin)
                                         : graphcut::full_box(pred.dims());
      pred = graphcut::grabcut_segment(c.image, box, clicks, std::nullopt, cfg.grabcut);
    }
    trace.push_back(iou(pred, c.gt));
  }
  return trace;
}

struct RefinementRow {
  std::string method;
  int k = 0;
  double baseline_iou = 0.0;
  double mean_iou = 0.0;
  double delta = 0.0;
};

struct RefinementTable {
  std::vector<RefinementRow> rows;
  std::vector<std::string> case_ids;

  const RefinementRow& row(RefineMethod m, int k) const {
    for (const auto& r : rows)
      if (r.method == to_string(m) && r.k == k) return r;
    fail("refinement table: no row for " + to_string(m) + " k=" + std::to_string(k));
  }
};

inline RefinementTable refinement_experiment(std::span<const RefinementCase> cases, const RefinementConfig& cfg) {
  cfg.validate();
  require(!cases.empty(), "refinement: no cases");
  const int max_k = *std::max_element(cfg.k_clicks.begin(), cfg.k_clicks.end());
  double baseline = 0.0;
  for (const auto& c : cases) baseline += iou(c.current, c.gt);
  baseline /= static_cast<double>(cases.size());

  RefinementTable table;
  for (const auto& c : cases) table.case_ids.push_back(c.id);
  for (RefineMethod m : cfg.methods) {
    std::vector<double> sum(static_cast<std::size_t>(max_k) + 1, 0.0);
    for (const auto& c : cases) {
      const auto trace = correct_case(c, m, max_k, cfg);
      for (int k = 1; k <= max_k; ++k) sum[k] += trace[k - 1];
    }
    for (int k : cfg.k_clicks) {
      const double mean = sum[k] / static_cast<double>(cases.size());
      // k = 0 reports the baseline itself so the delta is exactly zero.
      table.rows.push_back({to_string(m), k, baseline, k == 0 ? baseline : mean, k == 0 ? 0.0 : mean - baseline});
    }
  }
  return table;
}

inline void to_json(nlohmann::json& j, const RefinementRow& r) {
  j = nlohmann::json{
      {"method", r.method}, {"k", r.k}, {"baseline_iou", r.baseline_iou}, {"mean_iou", r.mean_iou}, {"delta", r.delta}};
}

inline void to_json(nlohmann::json& j, const RefinementTable& t) {
  j = nlohmann::json{{"rows", t.rows}, {"cases", t.case_ids}};
}

}  // namespace clickseg::eval
