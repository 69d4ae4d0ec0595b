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


#include <algorithm>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "clickseg/eval/protocol.hpp"
#include "clickseg/eval/synthetic.hpp"
#include "clickseg/predict.hpp"
#include "test_util.hpp"

namespace clickseg {
namespace {

using testing::disk_mask;
using testing::rect_mask;
using testing::two_tone;

PredictRequest request(const Image& img, std::vector<Click> clicks, std::optional<BinaryMask> prior = std::nullopt) {
  return {img, encode_gaussian(clicks, img.dims(), {}), std::move(prior), std::move(clicks)};
}

void expect_unit_range(const ProbabilityMap& p, Dims d) {
  ASSERT_EQ(p.dims(), d);
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Sigmoid, Basics) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(logit(0.9)), 0.9, 1e-15);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(OraclePredict, Exact) {
  Rng rng(1);
  const BinaryMask gt = testing::random_mask(rng, {30, 20}, 0.4);
  const ProbabilityMap p = oracle_predict(gt, 0.0, 0, 3);
  EXPECT_EQ(threshold(p), gt);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], gt[i] ? 0.95 : 0.05);
}

TEST(OraclePredict, DeterministicAndNoisy) {
  double lo = 1.0, mean = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    const BinaryMask gt = eval::detail::random_object(rng, {64, 64});
    const ProbabilityMap a = oracle_predict(gt, 0.3, 2, s);
    EXPECT_EQ(a, oracle_predict(gt, 0.3, 2, s));
    const double v = iou(threshold(a), gt);
    lo = std::min(lo, v);
    mean += v / 100.0;
    EXPECT_NE(a, oracle_predict(gt, 0.0, 2, s));
  }
  EXPECT_GT(lo, 0.5);
  EXPECT_LT(mean, 1.0);
  EXPECT_THROW(oracle_predict(BinaryMask(4, 4), 1.0, 0, 0), Error);
}

TEST(ColorModel, NeutralWhenEverythingCancels) {
  BackendSpec spec;
  spec.color.lambda_guidance = 0.0;
  spec.color.lambda_prior = 0.0;
  const Image img(20, 20, Rgb{90, 90, 90});
  const auto req = request(img, {{10, 10, Polarity::positive}, {2, 2, Polarity::negative}}, BinaryMask(20, 20));
  for (double v : predict(spec, req)) EXPECT_EQ(v, 0.5);
}

TEST(ColorModel, TwoColorOneClickEach) {
  BackendSpec spec;
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(200 + s);
    const eval::Scene sc = eval::two_color_scene(rng);
    const Click pos = eval::first_click(sc.gt);
    const Point neg = *eval::pole_of_inaccessibility(mask_not(sc.gt));
    const ProbabilityMap p = predict(spec, request(sc.image, {pos, {neg.x, neg.y, Polarity::negative}}));
    expect_unit_range(p, sc.gt.dims());
    EXPECT_GE(iou(threshold(p), sc.gt), 0.9) << "seed " << 200 + s;
  }
}

TEST(ColorModel, PriorMaskShiftsLogit) {
  BackendSpec spec;
  spec.color.lambda_guidance = 0.0;
  const Image img(16, 16, Rgb{5, 5, 5});
  const BinaryMask prior = rect_mask({16, 16}, 4, 4, 11, 11);
  const ProbabilityMap p = predict(spec, request(img, {}, prior));
  // Identical colors cancel the likelihoods, leaving sigmoid(+-lambda_prior).
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], sigmoid(prior[i] ? 1.0 : -1.0), 1e-12);
}

TEST(Backends, OutputsInUnitRange) {
  Rng rng(31);
  const eval::Scene sc = eval::textured_scene(rng);
  const std::vector<Click> clicks{eval::first_click(sc.gt), {1, 1, Polarity::negative}};
  BackendSpec color, grab, oracle;
  grab.kind = BackendKind::grabcut_adapter;
  oracle.kind = BackendKind::oracle;
  oracle.oracle.gt = sc.gt;
  oracle.oracle.noise_level = 0.2;
  oracle.oracle.blur_radius = 1;
  for (const auto& spec : {color, grab, oracle}) {
    expect_unit_range(predict(spec, request(sc.image, clicks)), sc.gt.dims());
    expect_unit_range(predict(spec, request(sc.image, clicks, sc.gt)), sc.gt.dims());
    expect_unit_range(predict(spec, request(sc.image, {})), sc.gt.dims());
  }
}

TEST(Backends, OracleUsePrior) {
  BackendSpec spec;
  spec.kind = BackendKind::oracle;
  spec.oracle.use_prior = true;
  const BinaryMask prior = disk_mask({24, 24}, 12, 12, 6);
  EXPECT_EQ(threshold(predict(spec, request(Image(24, 24), {}, prior))), prior);
  spec.oracle.use_prior = false;
  EXPECT_THROW(predict(spec, request(Image(24, 24), {})), Error);
}

TEST(Backends, RequestValidation) {
  BackendSpec spec;
  auto req = request(Image(10, 10), {});
  req.prior_mask = BinaryMask(9, 10);
  EXPECT_THROW(predict(spec, req), Error);
  req.prior_mask.reset();
  req.clicks.push_back({10, 0, Polarity::positive});
  EXPECT_THROW(predict(spec, req), Error);
}

TEST(BackendSpec, JsonRoundtrip) {
  BackendSpec o;
  o.kind = BackendKind::oracle;
  o.oracle.gt = disk_mask({12, 9}, 5, 4, 3);
  o.oracle.noise_level = 0.25;
  o.oracle.blur_radius = 2;
  o.oracle.seed = 17;
  const BackendSpec o2 = nlohmann::json(o).get<BackendSpec>();
  EXPECT_EQ(o2.kind, BackendKind::oracle);
  EXPECT_EQ(*o2.oracle.gt, *o.oracle.gt);
  EXPECT_EQ(o2.oracle.noise_level, 0.25);
  EXPECT_EQ(o2.oracle.seed, 17u);

  const auto c = nlohmann::json::parse(R"({"kind":"color_model","params":{"lambda_prior":3}})").get<BackendSpec>();
  EXPECT_EQ(c.color.lambda_prior, 3.0);
  EXPECT_EQ(c.color.lambda_guidance, 2.0);
  const auto g = nlohmann::json::parse(R"({"kind":"grabcut_adapter","params":{"rounds":2,"box_margin":4}})").get<BackendSpec>();
  EXPECT_EQ(g.grabcut.grabcut.rounds, 2);
  EXPECT_EQ(g.grabcut.box_margin, 4);
  EXPECT_THROW(nlohmann::json::parse(R"({"kind":"deep"})").get<BackendSpec>(), Error);
  EXPECT_THROW(nlohmann::json::parse(R"({"params":{}})").get<BackendSpec>(), Error);
}

TEST(AppearanceModel, PriorAndMeans) {
  const BinaryMask mask = rect_mask({20, 20}, 0, 0, 9, 9);
  const Image img = two_tone(mask, {250, 10, 10}, {10, 10, 250});
  const AppearanceModel m = fit_first_frame_model(img, mask);
  EXPECT_DOUBLE_EQ(m.prior, 0.25);
  for (const auto& c : m.fg.components()) {
    if (c.weight <= 0) continue;
    EXPECT_NEAR((c.mean - graphcut::to_vec({250, 10, 10})).norm(), 0.0, 1e-9);
  }
  EXPECT_GT(m.log_likelihood_ratio({250, 10, 10}), 0.0);
  EXPECT_LT(m.log_likelihood_ratio({10, 10, 250}), 0.0);
  EXPECT_THROW(fit_first_frame_model(img, BinaryMask(20, 20)), Error);
  EXPECT_THROW(fit_first_frame_model(img, BinaryMask(20, 20, 1)), Error);
}

TEST(AppearanceModel, SwappingMaskSwapsRoles) {
  Rng rng(12);
  const eval::Scene sc = eval::textured_scene(rng);
  const AppearanceModel a = fit_first_frame_model(sc.image, sc.gt, 3, 10, 4);
  const AppearanceModel b = fit_first_frame_model(sc.image, mask_not(sc.gt), 3, 10, 4);
  const auto weighted_mean = [](const graphcut::Gmm& g) {
    graphcut::Vec3 m = graphcut::Vec3::Zero();
    for (const auto& c : g.components()) m += c.weight * c.mean;
    return m;
  };
  EXPECT_LE((weighted_mean(a.fg) - weighted_mean(b.bg)).norm(), 1e-6);
  EXPECT_LE((weighted_mean(a.bg) - weighted_mean(b.fg)).norm(), 1e-6);
  EXPECT_NEAR(a.prior + b.prior, 1.0, 1e-12);
}

TEST(Propagation, StaticSequence) {
  Rng rng(40);
  const eval::Scene sc = eval::two_color_scene(rng);
  const std::vector<Image> frames(6, sc.image);
  const auto masks = propagate_sequence(frames, fit_first_frame_model(sc.image, sc.gt), sc.gt);
  ASSERT_EQ(masks.size(), frames.size());
  EXPECT_EQ(masks[0], sc.gt);
  for (const auto& m : masks) EXPECT_GE(iou(m, sc.gt), 0.95);
}

TEST(Propagation, MovingSquare) {
  std::vector<Image> frames;
  std::vector<BinaryMask> gts;
  for (int t = 0; t < 20; ++t) {
    gts.push_back(rect_mask({80, 64}, 8 + 2 * t, 20, 23 + 2 * t, 35));
    frames.push_back(two_tone(gts.back(), {200, 180, 40}, {40, 60, 120}));
  }
  const auto masks = propagate_sequence(frames, fit_first_frame_model(frames[0], gts[0]), gts[0]);
  double mean = 0.0;
  for (std::size_t t = 0; t < masks.size(); ++t) mean += iou(masks[t], gts[t]);
  EXPECT_GE(mean / 20.0, 0.8);
}

TEST(Propagation, ZeroTemporalWeightIsPerFrame) {
  Rng rng(8);
  const eval::Sequence seq = eval::translating_sequence(rng, 6, 3.0, {48, 48}, true);
  PropagationParams prm;
  prm.temporal_weight = 0.0;
  const AppearanceModel model = fit_first_frame_model(seq.frames[0], seq.gts[0]);
  const auto base = propagate_sequence(seq.frames, model, seq.gts[0], prm);
  std::vector<std::size_t> perm{0, 4, 2, 5, 1, 3};
  std::vector<Image> shuffled;
  for (std::size_t i : perm) shuffled.push_back(seq.frames[i]);
  const auto out = propagate_sequence(shuffled, model, seq.gts[0], prm);
  for (std::size_t k = 1; k < perm.size(); ++k) EXPECT_EQ(out[k], base[perm[k]]);
}

TEST(Propagation, ParamsJson) {
  const auto p = nlohmann::json::parse(R"({"temporal_weight": 0.5, "crf": {"iterations": 2}})").get<PropagationParams>();
  EXPECT_EQ(p.temporal_weight, 0.5);
  EXPECT_EQ(p.temporal_blur, 2);
  EXPECT_EQ(p.crf.iterations, 2);
  EXPECT_THROW(nlohmann::json::parse(R"({"temporal_blur": -1})").get<PropagationParams>(), Error);
  EXPECT_THROW(propagate_sequence({}, AppearanceModel{}, BinaryMask(2, 2)), Error);
}

}  // namespace
}  // namespace clickseg
