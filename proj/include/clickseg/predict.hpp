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

// Pixel-probability backends and first-frame appearance propagation.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clickseg/core/metrics.hpp"
#include "clickseg/core/random.hpp"
#include "clickseg/core/raster.hpp"
#include "clickseg/core/rle.hpp"
#include "clickseg/crf/dense_crf.hpp"
#include "clickseg/graphcut/gmm.hpp"
#include "clickseg/graphcut/grabcut.hpp"
#include "clickseg/guidance.hpp"

namespace clickseg {

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

enum class BackendKind { oracle, color_model, grabcut_adapter };

struct OracleParams {
  std::optional<BinaryMask> gt;  // required unless use_prior
  bool use_prior = false;        // take the request's prior mask as ground truth
  double noise_level = 0.0;
  int blur_radius = 0;
  std::uint64_t seed = 0;
};

struct ColorModelParams {
  double lambda_guidance = 2.0;
  double lambda_prior = 1.0;
  std::size_t components = 5;
  int em_iterations = 10;
  std::uint64_t seed = 0;
};

struct GrabCutAdapterParams {
  graphcut::GrabCutParams grabcut;
  int box_margin = 10;
  double lambda_guidance = 2.0;
};

struct BackendSpec {
  BackendKind kind = BackendKind::color_model;
  OracleParams oracle;
  ColorModelParams color;
  GrabCutAdapterParams grabcut;

  void validate() const {
    if (kind == BackendKind::oracle) {
      require(oracle.gt.has_value() || oracle.use_prior, "oracle backend: needs \"gt\" or \"use_prior\"");
      require(oracle.noise_level >= 0.0 && oracle.noise_level < 1.0, "oracle backend: noise_level must be in [0,1)");
      require(oracle.blur_radius >= 0, "oracle backend: blur_radius must be >= 0");
    } else if (kind == BackendKind::color_model) {
      require(color.components >= 1, "color_model backend: components must be >= 1");
      require(color.em_iterations >= 0, "color_model backend: em_iterations must be >= 0");
    } else {
      grabcut.grabcut.validate();
      require(grabcut.box_margin >= 0, "grabcut_adapter backend: box_margin must be >= 0");
    }
  }
};

struct PredictRequest {
  Image image;
  GuidanceMap guidance;
  std::optional<BinaryMask> prior_mask;
  std::vector<Click> clicks;  // raw clicks, for backends that take hard constraints
};

/// GT mapped to {0.05, 0.95}, box-blurred, then round(noise_level * N) seeded pixels are moved
/// to v + (0.5 - v) * u, u ~ U[0,1): toward 0.5 without reaching it.
inline ProbabilityMap oracle_predict(const BinaryMask& gt, double noise_level, int blur_radius, std::uint64_t seed) {
  require(noise_level >= 0.0 && noise_level < 1.0, "oracle_predict: noise_level must be in [0,1)");
  require(blur_radius >= 0, "oracle_predict: blur_radius must be >= 0");
  ProbabilityMap p(gt.dims());
  for (std::size_t i = 0; i < gt.size(); ++i) p[i] = gt[i] ? 0.95 : 0.05;
  if (blur_radius > 0) p = box_blur(p, blur_radius);
  const auto count = static_cast<std::size_t>(std::llround(noise_level * static_cast<double>(p.size())));
  if (count == 0) return p;
  Rng rng(seed);
  std::vector<std::size_t> order(p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  for (std::size_t k = 0; k < count; ++k) {
    double& v = p[order[k]];
    v += (0.5 - v) * uniform_real(rng);
  }
  return p;
}

namespace detail {

inline std::optional<graphcut::Gmm> fit_seeded(const Image& img, const BinaryMask& seeds, std::size_t k, int iters,
                                               std::uint64_t seed) {
  std::vector<Rgb> px;
  for (std::size_t i = 0; i < img.size(); ++i)
    if (seeds[i]) px.push_back(img[i]);
  if (px.empty()) return std::nullopt;
  return graphcut::fit_gmm(px, std::min(k, px.size()), iters, seed).model;
}

inline ProbabilityMap color_model_predict(const ColorModelParams& prm, const PredictRequest& req) {
  const Dims d = req.image.dims();
  BinaryMask fg_seed(d), bg_seed(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double g = req.guidance[i];
    if (g >= 0.5) {
      fg_seed[i] = 1;
    } else if (g <= -0.5) {
      bg_seed[i] = 1;
    } else if (req.prior_mask) {
      ((*req.prior_mask)[i] ? fg_seed : bg_seed)[i] = 1;
    }
  }
  if (count_foreground(bg_seed) == 0) {
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x)
        if ((x == 0 || y == 0 || x == d.width - 1 || y == d.height - 1) && !fg_seed.at(x, y)) bg_seed.at(x, y) = 1;
  }
  const auto fg = fit_seeded(req.image, fg_seed, prm.components, prm.em_iterations, prm.seed);
  const auto bg = fit_seeded(req.image, bg_seed, prm.components, prm.em_iterations, prm.seed + 1);

  ProbabilityMap p(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double z = prm.lambda_guidance * req.guidance[i];
    if (fg && bg) z += fg->log_density(req.image[i]) - bg->log_density(req.image[i]);
    if (req.prior_mask) z += prm.lambda_prior * ((*req.prior_mask)[i] ? 1.0 : -1.0);
    p[i] = sigmoid(z);
  }
  return p;
}

inline ProbabilityMap grabcut_adapter_predict(const GrabCutAdapterParams& prm, const PredictRequest& req) {
  const Dims d = req.image.dims();
  const BinaryMask current = req.prior_mask ? *req.prior_mask : BinaryMask(d);
  bool has_positive = false;
  for (const Click& c : req.clicks) has_positive = has_positive || c.polarity == Polarity::positive;
  const graphcut::BoxPrior box = count_foreground(current) > 0 || has_positive
                                     ? graphcut::heuristic_box(current, req.clicks, prm.box_margin)
                                     : graphcut::full_box(d);
  const BinaryMask m = graphcut::grabcut_segment(req.image, box, req.clicks, req.prior_mask, prm.grabcut);
  ProbabilityMap p(d);
  const double hi = logit(0.9);
  for (std::size_t i = 0; i < d.size(); ++i) p[i] = sigmoid((m[i] ? hi : -hi) + prm.lambda_guidance * req.guidance[i]);
  return p;
}

}  // namespace detail

inline ProbabilityMap predict(const BackendSpec& spec, const PredictRequest& req) {
  spec.validate();
  require_same_dims(req.image, req.guidance, "predict guidance");
  if (req.prior_mask) require_same_dims(req.image, *req.prior_mask, "predict prior mask");
  require_in_bounds(req.clicks, req.image.dims());
  switch (spec.kind) {
    case BackendKind::oracle: {
      const BinaryMask& gt = spec.oracle.use_prior ? (req.prior_mask ? *req.prior_mask : BinaryMask(req.image.dims()))
                                                   : *spec.oracle.gt;
      require_same_dims(req.image, gt, "oracle backend gt");
      return oracle_predict(gt, spec.oracle.noise_level, spec.oracle.blur_radius, spec.oracle.seed);
    }
    case BackendKind::color_model:
      return detail::color_model_predict(spec.color, req);
    case BackendKind::grabcut_adapter:
      return detail::grabcut_adapter_predict(spec.grabcut, req);
  }
  throw Error(ErrorCode::internal, "predict: unhandled backend kind");
}

// First-frame appearance model and propagation.

struct AppearanceModel {
  graphcut::Gmm fg;
  graphcut::Gmm bg;
  double prior = 0.5;  // foreground area fraction

  double log_likelihood_ratio(const Rgb& c) const {
    return std::log(prior) - std::log1p(-prior) + fg.log_density(c) - bg.log_density(c);
  }
};

inline AppearanceModel fit_first_frame_model(const Image& img, const BinaryMask& mask, std::size_t components = 5,
                                             int em_iterations = 10, std::uint64_t seed = 0) {
  require_same_dims(img, mask, "fit_first_frame_model");
  std::vector<Rgb> fg, bg;
  for (std::size_t i = 0; i < img.size(); ++i) (mask[i] ? fg : bg).push_back(img[i]);
  require(!fg.empty() && !bg.empty(), "fit_first_frame_model: mask must contain foreground and background");
  AppearanceModel m;
  m.fg = graphcut::fit_gmm(fg, std::min(components, fg.size()), em_iterations, seed).model;
  m.bg = graphcut::fit_gmm(bg, std::min(components, bg.size()), em_iterations, seed + 1).model;
  m.prior = static_cast<double>(fg.size()) / static_cast<double>(img.size());
  return m;
}

struct PropagationParams {
  crf::CrfParams crf;
  double temporal_weight = 2.0;
  int temporal_blur = 2;  // box radius applied to the previous mask
};

/// Frame 0 returns `first_mask`; frame t > 0 thresholds the CRF over
/// sigmoid(LLR + temporal_weight * (2 * blur(mask[t-1]) - 1)).
inline std::vector<BinaryMask> propagate_sequence(std::span<const Image> frames, const AppearanceModel& model,
                                                  const BinaryMask& first_mask, const PropagationParams& prm = {}) {
  require(!frames.empty(), "propagate_sequence: no frames");
  require(prm.temporal_blur >= 0, "propagate_sequence: temporal_blur must be >= 0");
  require_same_dims(frames[0], first_mask, "propagate_sequence");
  std::vector<BinaryMask> out{first_mask};
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const Image& img = frames[t];
    require_same_dims(img, first_mask, "propagate_sequence frame");
    ProbabilityMap p(img.dims());
    std::optional<ProbabilityMap> prev;
    if (prm.temporal_weight != 0.0) {
      ProbabilityMap m(img.dims());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = out.back()[i];
      prev = prm.temporal_blur > 0 ? box_blur(m, prm.temporal_blur) : m;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      double z = model.log_likelihood_ratio(img[i]);
      if (prev) z += prm.temporal_weight * (2.0 * (*prev)[i] - 1.0);
      p[i] = sigmoid(z);
    }
    out.push_back(crf::crf_refine(p, img, prm.crf));
  }
  return out;
}

inline void to_json(nlohmann::json& j, const PropagationParams& p) {
  j = nlohmann::json{{"crf", p.crf}, {"temporal_weight", p.temporal_weight}, {"temporal_blur", p.temporal_blur}};
}

inline void from_json(const nlohmann::json& j, PropagationParams& p) {
  p = PropagationParams{};
  try {
    if (j.contains("crf")) p.crf = j.at("crf").get<crf::CrfParams>();
    p.temporal_weight = j.value("temporal_weight", p.temporal_weight);
    p.temporal_blur = j.value("temporal_blur", p.temporal_blur);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("propagation json: ") + e.what());
  }
  require(p.temporal_blur >= 0, "propagation: temporal_blur must be >= 0");
}

// JSON: {"kind": "oracle"|"color_model"|"grabcut_adapter", "params": {...}}.
// Oracle "gt" is an RLE mask object.

inline std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::oracle:
      return "oracle";
    case BackendKind::color_model:
      return "color_model";
    case BackendKind::grabcut_adapter:
      return "grabcut_adapter";
  }
  return "unknown";
}

inline void to_json(nlohmann::json& j, const BackendSpec& s) {
  nlohmann::json p = nlohmann::json::object();
  switch (s.kind) {
    case BackendKind::oracle:
      if (s.oracle.gt) p["gt"] = rle_encode(*s.oracle.gt);
      p["use_prior"] = s.oracle.use_prior;
      p["noise_level"] = s.oracle.noise_level;
      p["blur_radius"] = s.oracle.blur_radius;
      p["seed"] = s.oracle.seed;
      break;
    case BackendKind::color_model:
      p = {{"lambda_guidance", s.color.lambda_guidance}, {"lambda_prior", s.color.lambda_prior},
           {"components", s.color.components},          {"em_iterations", s.color.em_iterations},
           {"seed", s.color.seed}};
      break;
    case BackendKind::grabcut_adapter:
      p = s.grabcut.grabcut;
      p["box_margin"] = s.grabcut.box_margin;
      p["lambda_guidance"] = s.grabcut.lambda_guidance;
      break;
  }
  j = nlohmann::json{{"kind", to_string(s.kind)}, {"params", p}};
}

inline void from_json(const nlohmann::json& j, BackendSpec& s) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    s = BackendSpec{};
    if (kind == "oracle") {
      s.kind = BackendKind::oracle;
      if (p.contains("gt")) s.oracle.gt = rle_decode(p.at("gt").get<RleMask>());
      s.oracle.use_prior = p.value("use_prior", false);
      s.oracle.noise_level = p.value("noise_level", 0.0);
      s.oracle.blur_radius = p.value("blur_radius", 0);
      s.oracle.seed = p.value("seed", std::uint64_t{0});
    } else if (kind == "color_model") {
      s.kind = BackendKind::color_model;
      s.color.lambda_guidance = p.value("lambda_guidance", s.color.lambda_guidance);
      s.color.lambda_prior = p.value("lambda_prior", s.color.lambda_prior);
      s.color.components = p.value("components", s.color.components);
      s.color.em_iterations = p.value("em_iterations", s.color.em_iterations);
      s.color.seed = p.value("seed", s.color.seed);
    } else if (kind == "grabcut_adapter") {
      s.kind = BackendKind::grabcut_adapter;
      s.grabcut.grabcut = p.get<graphcut::GrabCutParams>();
      s.grabcut.box_margin = p.value("box_margin", s.grabcut.box_margin);
      s.grabcut.lambda_guidance = p.value("lambda_guidance", s.grabcut.lambda_guidance);
    } else {
      fail("unknown backend kind \"" + kind + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("backend json: ") + e.what());
  }
  s.validate();
}

}  // namespace clickseg
