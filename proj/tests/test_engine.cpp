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


#include <vector>

#include <gtest/gtest.h>

#include "clickseg/engine/store.hpp"
#include "clickseg/eval/dataset.hpp"
#include "clickseg/eval/protocol.hpp"
#include "clickseg/eval/synthetic.hpp"
#include "test_util.hpp"

namespace clickseg::engine {
namespace {

using clickseg::testing::rect_mask;
using clickseg::testing::temp_dir;

SessionConfig oracle_config(const BinaryMask& gt) {
  SessionConfig c;
  c.backend.kind = BackendKind::oracle;
  c.backend.oracle.gt = gt;
  return c;
}

SessionConfig prior_oracle_config() {
  SessionConfig c;
  c.backend.kind = BackendKind::oracle;
  c.backend.oracle.use_prior = true;
  return c;
}

eval::Scene scene(std::uint64_t seed, bool textured = false) {
  Rng rng(seed);
  return textured ? eval::textured_scene(rng) : eval::two_color_scene(rng);
}

void expect_clamped(const BinaryMask& m, std::span<const Click> clicks, const EncodingConfig& enc) {
  const Raster<int> want = clamp_labels(m.dims(), clicks, enc);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (want[i] < 0) continue;
    EXPECT_EQ(int(m[i]), want[i]) << "pixel " << i;
  }
}

TEST(RefineStep, OracleOneClickGivesGroundTruth) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const eval::Scene sc = scene(60 + s);
    Session session = make_session("a", sc.image, oracle_config(sc.gt));
    const std::vector<Click> click{eval::first_click(sc.gt)};
    EXPECT_EQ(refine_step(session, click).mask, sc.gt) << "seed " << 60 + s;
  }
}

TEST(RefineStep, NoClicksKeepsPrior) {
  const eval::Scene sc = scene(5);
  Session session = make_session("b", sc.image, prior_oracle_config(), sc.gt);
  const StepResult r = refine_step(session, {});
  EXPECT_EQ(r.mask, sc.gt);
  EXPECT_EQ(r.session.step_count(), 1u);
  EXPECT_EQ(r.session.masks.size(), 2u);
}

TEST(RefineStep, ClampInvariant) {
  Rng rng(9);
  for (int trial = 0; trial < 6; ++trial) {
    const eval::Scene sc = scene(100 + trial, true);
    Session s = make_session("c", sc.image, {});
    std::vector<Click> all;
    for (int step = 0; step < 3; ++step) {
      std::vector<Click> fresh;
      for (int k = 0; k < 3; ++k)
        fresh.push_back({int(uniform_index(rng, 64)), int(uniform_index(rng, 64)),
                         uniform_index(rng, 2) ? Polarity::positive : Polarity::negative});
      all.insert(all.end(), fresh.begin(), fresh.end());
      auto r = refine_step(std::move(s), fresh);
      s = std::move(r.session);
      expect_clamped(r.mask, all, s.config.encoding);
    }
  }
}

TEST(RefineStep, RejectsOutOfBounds) {
  Session s = make_session("d", Image(8, 8), {});
  EXPECT_THROW(refine_step(s, std::vector<Click>{{8, 0, Polarity::positive}}), Error);
  EXPECT_THROW(make_session("d", Image(8, 8), {}, BinaryMask(7, 8)), Error);
}

TEST(Session, DeterministicHistories) {
  const eval::Scene sc = scene(17, true);
  const std::vector<std::vector<Click>> steps{{eval::first_click(sc.gt)}, {{3, 3, Polarity::negative}}, {{40, 20, Polarity::positive}, {10, 50, Polarity::negative}}};
  const auto run = [&] {
    Session s = make_session("e", sc.image, {});
    for (const auto& st : steps) s = refine_step(std::move(s), st).session;
    return s;
  };
  const Session a = run(), b = run();
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_EQ(replay(a).masks, a.masks);
}

TEST(Undo, InverseAndRedo) {
  const eval::Scene sc = scene(23, true);
  Session s = make_session("f", sc.image, {});
  EXPECT_THROW(undo(s), Error);
  try {
    undo(s);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::conflict);
  }
  s = refine_step(std::move(s), std::vector<Click>{eval::first_click(sc.gt)}).session;
  const Session before = s;
  const std::vector<Click> second{{2, 60, Polarity::negative}, {30, 30, Polarity::positive}};
  const StepResult r = refine_step(s, second);
  const Session undone = undo(r.session);
  EXPECT_EQ(undone.masks, before.masks);
  EXPECT_EQ(undone.clicks(), before.clicks());
  EXPECT_EQ(refine_step(undone, second).mask, r.mask);
}

TEST(Store, SessionRoundtrip) {
  const auto dir = temp_dir("engine_store");
  const eval::Scene sc = scene(29);
  Session s = make_session("s0123", sc.image, oracle_config(sc.gt), rect_mask(sc.gt.dims(), 3, 3, 9, 9));
  s.seed_clicks.push_back({5, 5, Polarity::positive});
  s.gt = sc.gt;
  s = refine_step(std::move(s), std::vector<Click>{eval::first_click(sc.gt), {0, 0, Polarity::negative}}).session;
  s = refine_step(std::move(s), std::vector<Click>{{60, 60, Polarity::negative}}).session;
  save_session(dir / "s0123", s);
  save_session(dir / "s0123", s);  // overwrite in place
  const Session back = load_session(dir / "s0123");
  EXPECT_EQ(back.id, s.id);
  EXPECT_EQ(back.image, s.image);
  EXPECT_EQ(back.masks, s.masks);
  EXPECT_EQ(back.steps, s.steps);
  EXPECT_EQ(back.seed_clicks, s.seed_clicks);
  EXPECT_EQ(back.has_initial_mask, true);
  EXPECT_EQ(*back.gt, sc.gt);
  EXPECT_EQ(nlohmann::json(back.config), nlohmann::json(s.config));
  EXPECT_EQ(replay(back).masks, s.masks);
  EXPECT_TRUE(std::filesystem::exists(dir / "s0123" / "masks" / "0002.pgm"));
  EXPECT_FALSE(std::filesystem::exists(dir / "s0123.tmp"));
  try {
    load_session(dir / "missing");
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
}

TEST(Sequence, SegmentAndWorstFrame) {
  Rng rng(31);
  const eval::Sequence src = eval::translating_sequence(rng, 8, 2.0);
  SequenceSession q = make_sequence("q1", src.frames);
  EXPECT_THROW(segment_sequence(q), Error);
  EXPECT_THROW(worst_frame(q), Error);
  q = set_first_frame(std::move(q), src.gts[0]);
  q = segment_sequence(std::move(q));
  ASSERT_EQ(q.masks.size(), 8u);
  EXPECT_EQ(q.masks[0], src.gts[0]);
  EXPECT_EQ(segment_sequence(q).masks, q.masks);
  const WorstFrame w = worst_frame(q, src.gts);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_LE(w.score, iou(q.masks[t], src.gts[t]));
}

TEST(Sequence, SingleFrameAndStatic) {
  const eval::Scene sc = scene(37);
  SequenceSession one = set_first_frame(make_sequence("q2", {sc.image}), sc.gt);
  EXPECT_EQ(segment_sequence(one).masks, std::vector<BinaryMask>{sc.gt});
  SequenceSession stat = segment_sequence(set_first_frame(make_sequence("q3", std::vector<Image>(5, sc.image)), sc.gt));
  for (const auto& m : stat.masks) EXPECT_GE(iou(m, sc.gt), 0.95);
}

TEST(WorstFrame, ArgminAndTies) {
  const BinaryMask gt = rect_mask({20, 20}, 5, 5, 14, 14);
  const auto with_iou = [&](int rows) { return rect_mask({20, 20}, 5, 5, 14, 5 + rows - 1); };
  // IOU = rows / 10.
  const std::vector<BinaryMask> masks{with_iou(9), with_iou(3), with_iou(7)};
  const std::vector<BinaryMask> gts(3, gt);
  EXPECT_EQ(worst_frame(masks, gts).index, 1u);
  EXPECT_NEAR(worst_frame(masks, gts).score, 0.3, 1e-12);
  const std::vector<BinaryMask> same(4, gt);
  EXPECT_EQ(worst_frame(same, std::vector<BinaryMask>(4, gt)).index, 0u);
  EXPECT_EQ(worst_frame(same).index, 1u);
  EXPECT_THROW(worst_frame(std::vector<BinaryMask>{gt}), Error);
}

TEST(WorstFrame, SelfConsistencyFindsCorruption) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(400 + s);
    eval::Sequence seq = eval::translating_sequence(rng, 12, 1.0);
    const std::size_t bad = 2 + uniform_index(rng, 8);
    std::vector<BinaryMask> masks = seq.gts;
    masks[bad] = eval::corrupt_mask(masks[bad], rng, 0.4).mask;
    const std::size_t w = worst_frame(masks).index;
    EXPECT_TRUE(w == bad || w == bad + 1) << "corrupted " << bad << " picked " << w;
  }
}

TEST(RefineFrame, IsolationAndClamps) {
  Rng rng(41);
  const eval::Sequence src = eval::translating_sequence(rng, 6, 2.0);
  SequenceSession q = segment_sequence(set_first_frame(make_sequence("q4", src.frames, prior_oracle_config()), src.gts[0]));
  const auto before = q.masks;
  const SequenceSession same = refine_frame(q, 3, {});
  EXPECT_EQ(same.masks, before);

  const std::vector<Click> clicks{{10, 10, Polarity::positive}, {50, 50, Polarity::negative}};
  const SequenceSession r = refine_frame(q, 3, clicks);
  for (std::size_t t = 0; t < 6; ++t) {
    if (t == 3) continue;
    EXPECT_EQ(r.masks[t], before[t]);
  }
  EXPECT_TRUE(r.masks[3].at(10, 10));
  EXPECT_FALSE(r.masks[3].at(50, 50));
  ASSERT_EQ(r.refined.count(3), 1u);
  EXPECT_EQ(r.refined.at(3).step_count(), 1u);
  EXPECT_EQ(refine_frame(r, 3, std::vector<Click>{{20, 20, Polarity::positive}}).refined.at(3).step_count(), 2u);

  try {
    refine_frame(q, 6, clicks);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_found);
  }
}

TEST(RefineFrame, Repropagate) {
  Rng rng(43);
  const eval::Sequence src = eval::translating_sequence(rng, 6, 2.0);
  SequenceSession q = segment_sequence(set_first_frame(make_sequence("q5", src.frames), src.gts[0]));
  q.masks[2] = src.gts[2];
  const std::vector<Click> c{eval::first_click(src.gts[2])};
  const SequenceSession r = refine_frame(q, 2, c, true);
  EXPECT_EQ(r.masks[0], q.masks[0]);
  EXPECT_EQ(r.masks[1], q.masks[1]);
  const SequenceSession iso = refine_frame(q, 2, c, false);
  EXPECT_EQ(iso.masks[2], r.masks[2]);
  for (std::size_t t = 3; t < 6; ++t) EXPECT_EQ(iso.masks[t], q.masks[t]);
}

TEST(Store, SequenceRoundtrip) {
  const auto dir = temp_dir("engine_seq");
  Rng rng(47);
  const eval::Sequence src = eval::translating_sequence(rng, 4, 2.0);
  SequenceSession q = make_sequence("q6", src.frames);
  q.seed = 9;
  q.propagation.temporal_weight = 1.5;
  save_session(dir / "unused", make_session("x", src.frames[0], {}));
  save_sequence(dir / "q6", q);
  SequenceSession back = load_sequence(dir / "q6");
  EXPECT_TRUE(back.masks.empty());
  EXPECT_FALSE(back.first_mask.has_value());

  q = segment_sequence(set_first_frame(std::move(q), src.gts[0], "sabc"));
  q = refine_frame(std::move(q), 1, std::vector<Click>{{30, 30, Polarity::positive}});
  save_sequence(dir / "q6", q);
  back = load_sequence(dir / "q6");
  EXPECT_EQ(back.frames, q.frames);
  EXPECT_EQ(back.masks, q.masks);
  EXPECT_EQ(*back.first_mask, *q.first_mask);
  EXPECT_EQ(back.first_frame_session, "sabc");
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.propagation.temporal_weight, 1.5);
  ASSERT_EQ(back.refined.size(), 1u);
  EXPECT_EQ(back.refined.at(1).masks, q.refined.at(1).masks);
}

TEST(PriorMask, HelpsAfterOneCorrection) {
  const auto suite = eval::corrupted_mask_suite(50, eval::SceneKind::mixed, 100);
  const auto cases = eval::refinement_cases(suite);
  eval::RefinementConfig cfg;
  double with_prior = 0.0, without = 0.0;
  for (const auto& c : cases) {
    with_prior += eval::correct_case(c, eval::RefineMethod::prior_mask, 1, cfg)[0];
    without += eval::correct_case(c, eval::RefineMethod::no_prior, 1, cfg)[0];
  }
  EXPECT_GE(with_prior, without);
}

}  // namespace
}  // namespace clickseg::engine
