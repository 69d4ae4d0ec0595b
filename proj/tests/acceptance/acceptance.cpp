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


// Acceptance runner: one PASS/FAIL line per primary criterion. Exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "clickseg/core/metrics.hpp"
#include "clickseg/core/pnm.hpp"
#include "clickseg/core/rle.hpp"
#include "clickseg/crf/dense_crf.hpp"
#include "clickseg/engine/sequence.hpp"
#include "clickseg/engine/session.hpp"
#include "clickseg/eval/analytics.hpp"
#include "clickseg/eval/dataset.hpp"
#include "clickseg/eval/protocol.hpp"
#include "clickseg/eval/synthetic.hpp"
#include "clickseg/graphcut/grabcut.hpp"
#include "clickseg/graphcut/maxflow.hpp"
#include "clickseg/simulate.hpp"
#include "../test_util.hpp"

namespace {

using namespace clickseg;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Metric/oracle suite.

std::size_t brute_d2(const BinaryMask& m, int x, int y) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u)
      if (m.at(u, v)) best = std::min<std::size_t>(best, std::size_t((u - x) * (u - x) + (v - y) * (v - y)));
  return best;
}

std::size_t flood_count(const BinaryMask& m, bool eight) {
  std::vector<int> seen(m.size(), 0);
  std::size_t n = 0;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (!m[s] || seen[s]) continue;
    ++n;
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = int(i % m.width()), y = int(i / m.width());
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) || !m.contains(x + dx, y + dy)) continue;
          const std::size_t j = m.index(x + dx, y + dy);
          if (m[j] && !seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
    }
  }
  return n;
}

std::vector<std::uint64_t> brute_runs(const BinaryMask& m) {
  std::vector<std::uint64_t> runs{0};
  std::uint8_t label = 0;
  for (std::uint8_t v : m) {
    if ((v != 0) != (label != 0)) {
      runs.push_back(0);
      label = v ? 1 : 0;
    }
    ++runs.back();
  }
  return runs;
}

Outcome metric_oracles() {
  Rng rng(1);
  std::size_t mismatches = 0, cases = 0;
  for (int t = 0; t < 400; ++t) {
    const Dims d{1 + int(uniform_index(rng, 32)), 1 + int(uniform_index(rng, 32))};
    const BinaryMask a = testing::random_mask(rng, d, uniform_real(rng));
    const BinaryMask b = testing::random_mask(rng, d, uniform_real(rng));
    ++cases;
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      inter += a[i] && b[i];
      uni += a[i] || b[i];
    }
    const double want = uni == 0 ? 1.0 : double(inter) / double(uni);
    if (iou(a, b) != want || iou(b, a) != want) ++mismatches;

    const RealMap d2 = squared_distance_transform(a);
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        const std::size_t bd = brute_d2(a, x, y);
        const bool ok = bd == std::numeric_limits<std::size_t>::max() ? std::isinf(d2.at(x, y)) : d2.at(x, y) == double(bd);
        if (!ok) ++mismatches;
      }

    for (bool eight : {false, true})
      if (connected_components(a, eight ? Connectivity::eight : Connectivity::four).count() != flood_count(a, eight))
        ++mismatches;

    if (rle_encode(a).counts != brute_runs(a) || rle_decode(rle_encode(a)) != a) ++mismatches;
  }

  for (int t = 0; t < 400; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 9);
    const std::size_t s = uniform_index(rng, n);
    std::size_t sink = uniform_index(rng, n - 1);
    if (sink >= s) ++sink;
    graphcut::FlowNetwork net(n, s, sink);
    struct Arc {
      std::size_t u, v;
      double cap;
    };
    std::vector<Arc> arcs;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) {
        if (u == v || v == s || u == sink || uniform_real(rng) > 0.5) continue;
        const double cap = double(uniform_index(rng, 11));
        net.add_edge(u, v, cap);
        arcs.push_back({u, v, cap});
      }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
      if (!(bits >> s & 1) || (bits >> sink & 1)) continue;
      double cut = 0.0;
      for (const Arc& a : arcs)
        if ((bits >> a.u & 1) && !(bits >> a.v & 1)) cut += a.cap;
      best = std::min(best, cut);
    }
    const graphcut::MinCut mc = graphcut::max_flow_min_cut(net);
    double cut = 0.0;
    for (const Arc& a : arcs)
      if (mc.source_side[a.u] && !mc.source_side[a.v]) cut += a.cap;
    ++cases;
    if (mc.flow != best || cut != best || !mc.source_side[s] || mc.source_side[sink]) ++mismatches;
  }
  return {mismatches == 0, std::to_string(cases) + " instances, " + std::to_string(mismatches) + " mismatches"};
}

// CRF correctness.

template <class R>
R mirror(const R& r) {
  R out(r.dims());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) out.at(r.width() - 1 - x, y) = r.at(x, y);
  return out;
}

Outcome crf_correctness() {
  crf::CrfParams no_pair;
  no_pair.w_app = 0.0;
  no_pair.w_smooth = 0.0;
  std::size_t norm_bad = 0, sym_bad = 0, ident_bad = 0, over = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto inst = testing::crf_instance(1000 + s);
    const crf::Marginals ref = crf::mean_field_reference(inst.prob, inst.image, {});
    const crf::Marginals fast = crf::mean_field_fast(inst.prob, inst.image, {});
    const crf::Marginals ident = crf::mean_field_reference(inst.prob, inst.image, no_pair);
    const crf::Marginals mir = crf::mean_field_reference(mirror(inst.prob), mirror(inst.image), {});
    const ProbabilityMap back = mirror(mir.foreground());
    double inst_worst = 0.0;
    for (std::size_t i = 0; i < ref.fg.size(); ++i) {
      if (std::abs(ref.fg[i] + ref.bg[i] - 1.0) > 1e-9) ++norm_bad;
      if (back[i] != ref.fg[i]) ++sym_bad;
      if (ident.fg[i] != crf::clip_probability(inst.prob[i])) ++ident_bad;
      inst_worst = std::max(inst_worst, std::abs(ref.fg[i] - fast.fg[i]));
    }
    worst = std::max(worst, inst_worst);
    if (inst_worst > 0.02) ++over;
  }
  std::ostringstream os;
  os << "100 instances 48x48, 5 iterations; normalization violations " << norm_bad << ", symmetry " << sym_bad
     << ", zero-pairwise identity " << ident_bad << "; fast vs reference max-abs " << fmt("%.4g", worst)
     << ", instances over 0.02: " << over;
  return {norm_bad == 0 && sym_bad == 0 && ident_bad == 0 && over == 0, os.str()};
}

// Simulator constraints.

struct SimScene {
  BinaryMask gt;
  std::vector<BinaryMask> others;
  std::vector<double> dist_bg;   // to the nearest background pixel
  std::vector<double> dist_obj;  // to the nearest object pixel
};

SimScene sim_scene(std::uint64_t seed) {
  Rng rng(seed);
  const Dims d{48, 48};
  SimScene sc{eval::detail::random_object(rng, d), {}, {}, {}};
  for (int k = 0; k < 2; ++k) {
    BinaryMask o = eval::detail::random_object(rng, d);
    for (std::size_t i = 0; i < o.size(); ++i)
      if (sc.gt[i]) o[i] = 0;
    sc.others.push_back(std::move(o));
  }
  const auto brute = [&](bool want) {
    std::vector<double> out(sc.gt.size(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < sc.gt.size(); ++i)
      for (std::size_t j = 0; j < sc.gt.size(); ++j) {
        if ((sc.gt[j] != 0) != want) continue;
        const double dx = double(i % 48) - double(j % 48), dy = double(i / 48) - double(j / 48);
        out[i] = std::min(out[i], std::sqrt(dx * dx + dy * dy));
      }
    return out;
  };
  sc.dist_bg = brute(false);
  sc.dist_obj = brute(true);
  return sc;
}

bool spaced(const std::vector<Click>& cs, double step) {
  for (std::size_t a = 0; a < cs.size(); ++a)
    for (std::size_t b = a + 1; b < cs.size(); ++b)
      if (std::hypot(double(cs[a].x - cs[b].x), double(cs[a].y - cs[b].y)) < step) return false;
  return true;
}

Outcome simulator_constraints() {
  std::vector<SimScene> scenes;
  for (std::uint64_t s = 0; s < 40; ++s) scenes.push_back(sim_scene(7000 + s));
  const char* names[] = {"positive", "negative-1", "negative-2", "negative-3", "correction"};
  std::size_t violations[5] = {0, 0, 0, 0, 0}, clicks[5] = {0, 0, 0, 0, 0};
  for (int strat = 0; strat < 5; ++strat) {
    for (std::uint64_t j = 0; j < 1000; ++j) {
      const SimScene& sc = scenes[j % scenes.size()];
      SamplingConfig cfg;
      cfg.rng_seed = j;
      const std::size_t n = 1 + j % 10;
      std::vector<Click> cs;
      if (strat == 0) {
        cs = sample_positive_clicks(sc.gt, n, cfg);
      } else if (strat <= 3) {
        cs = sample_negative_clicks(sc.gt, sc.others, n, static_cast<NegativeStrategy>(strat), cfg);
      } else {
        Rng rng(j);
        const BinaryMask pred = eval::corrupt_mask(sc.gt, rng, uniform_real(rng, 0.3, 0.9)).mask;
        cs = sample_correction_clicks(pred, sc.gt, n, cfg);
        for (const Click& c : cs) {
          const bool in_error = (pred.at(c.x, c.y) != 0) != (sc.gt.at(c.x, c.y) != 0);
          const Polarity want = sc.gt.at(c.x, c.y) ? Polarity::positive : Polarity::negative;
          if (!in_error || c.polarity != want) ++violations[strat];
        }
      }
      clicks[strat] += cs.size();
      if (!spaced(cs, cfg.d_step)) ++violations[strat];
      for (const Click& c : cs) {
        const std::size_t i = sc.gt.index(c.x, c.y);
        bool ok = true;
        if (strat == 0) ok = sc.gt[i] && sc.dist_bg[i] >= cfg.d_margin && c.polarity == Polarity::positive;
        if (strat == 1 || strat == 3)
          ok = !sc.gt[i] && sc.dist_obj[i] >= cfg.d_margin && sc.dist_obj[i] <= cfg.d_hull &&
               c.polarity == Polarity::negative;
        if (strat == 2)
          ok = !sc.gt[i] && sc.dist_obj[i] >= cfg.d_margin && (sc.others[0][i] || sc.others[1][i]) &&
               c.polarity == Polarity::negative;
        if (!ok) ++violations[strat];
      }
    }
  }
  std::ostringstream os;
  os << "1000 draws each, d_margin 3, d_step 5, d_hull 40;";
  std::size_t total = 0;
  for (int s = 0; s < 5; ++s) {
    os << " " << names[s] << " " << violations[s] << "/" << clicks[s];
    total += violations[s];
  }
  os << " violations/clicks";
  return {total == 0, os.str()};
}

// Clamp invariant.

Outcome clamp_invariant() {
  std::size_t violations = 0, exceptions = 0, steps = 0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    Rng rng(9000 + r);
    try {
      eval::Scene sc = r % 2 ? eval::textured_scene(rng) : eval::two_color_scene(rng);
      std::optional<BinaryMask> initial;
      if (r % 3 == 0) initial = eval::corrupt_mask(sc.gt, rng, 0.5).mask;
      engine::Session s = engine::make_session("acc", sc.image, {}, initial);
      std::vector<Click> all;
      const int n_steps = 1 + int(uniform_index(rng, 3));
      for (int st = 0; st < n_steps; ++st) {
        std::vector<Click> fresh;
        const int n = 1 + int(uniform_index(rng, 4));
        for (int k = 0; k < n; ++k)
          fresh.push_back({int(uniform_index(rng, 64)), int(uniform_index(rng, 64)),
                           uniform_index(rng, 2) ? Polarity::positive : Polarity::negative});
        all.insert(all.end(), fresh.begin(), fresh.end());
        auto res = engine::refine_step(std::move(s), fresh);
        s = std::move(res.session);
        ++steps;
        const Raster<int> want = clamp_labels(res.mask.dims(), all, s.config.encoding);
        for (std::size_t i = 0; i < want.size(); ++i)
          if (want[i] >= 0 && int(res.mask[i] != 0) != want[i]) ++violations;
      }
    } catch (const std::exception&) {
      ++exceptions;
    }
  }
  return {violations == 0 && exceptions == 0, "200 runs, " + std::to_string(steps) + " steps, " +
                                                  std::to_string(violations) + " clamped pixels wrong, " +
                                                  std::to_string(exceptions) + " exceptions"};
}

// Mask-correction trend.

Outcome correction_trend() {
  const auto suite = eval::corrupted_mask_suite(50, eval::SceneKind::mixed, 100);
  const auto cases = eval::refinement_cases(suite);
  const eval::RefinementTable t = eval::refinement_experiment(cases, {});
  using eval::RefineMethod;
  const auto delta = [&](RefineMethod m, int k) { return t.row(m, k).delta; };
  const bool order = delta(RefineMethod::prior_mask, 1) > delta(RefineMethod::no_prior, 1) &&
                     delta(RefineMethod::no_prior, 1) > delta(RefineMethod::grabcut, 1);
  bool monotone = true;
  std::ostringstream os;
  os << "50 cases, baseline IOU " << fmt("%.3f", t.row(RefineMethod::prior_mask, 1).baseline_iou) << "; deltas k=1/4/10:";
  for (RefineMethod m : {RefineMethod::prior_mask, RefineMethod::no_prior, RefineMethod::grabcut}) {
    os << " " << eval::to_string(m);
    for (int k : {1, 4, 10}) os << (k == 1 ? " " : "/") << fmt("%+.3f", delta(m, k));
    if (delta(m, 4) < delta(m, 1) || delta(m, 10) < delta(m, 4)) monotone = false;
    if (m != RefineMethod::grabcut && delta(m, 1) < 0.0) monotone = false;
  }
  os << "; ordering at k=1 " << (order ? "holds" : "violated") << ", monotone in k " << (monotone ? "holds" : "violated");
  return {order && monotone, os.str()};
}

// GrabCut baseline sanity.

Outcome grabcut_sanity() {
  eval::ProtocolConfig cfg;
  const auto run = [&](bool textured) {
    double total = 0.0;
    int worst = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      Rng rng(5000 + s);
      const eval::Scene sc = textured ? eval::textured_scene(rng) : eval::two_color_scene(rng);
      const auto box = graphcut::heuristic_box(sc.gt, {}, 0);
      const eval::ClickRun r = eval::clicks_to_threshold(sc.gt, eval::grabcut_segmenter(sc.image, box), cfg);
      total += r.clicks_used;
      worst = std::max(worst, r.clicks_used);
    }
    return std::pair{total / 50.0, worst};
  };
  const auto [two_mean, two_worst] = run(false);
  const auto [tex_mean, tex_worst] = run(true);
  std::ostringstream os;
  os << "clicks@90 two-color mean " << fmt("%.2f", two_mean) << " (max " << two_worst << "), textured mean "
     << fmt("%.2f", tex_mean) << " (max " << tex_worst << ", cap 20)";
  return {two_mean <= 5.0 && tex_worst <= 20, os.str()};
}

// Propagation and worst frame.

std::vector<BinaryMask> propagate_from_gt(const eval::Sequence& seq) {
  engine::SequenceSession q = engine::make_sequence("acc", seq.frames);
  q = engine::set_first_frame(std::move(q), seq.gts[0]);
  return engine::segment_sequence(std::move(q)).masks;
}

double mean_iou(const std::vector<BinaryMask>& masks, const std::vector<BinaryMask>& gts) {
  double s = 0.0;
  for (std::size_t t = 0; t < masks.size(); ++t) s += iou(masks[t], gts[t]);
  return s / double(masks.size());
}

Outcome propagation_worst_frame() {
  Rng rng(11);
  const eval::Sequence seq = eval::translating_sequence(rng, 20, 2.0);
  const std::vector<BinaryMask> masks = propagate_from_gt(seq);
  const double quality = mean_iou(masks, seq.gts);

  std::size_t found = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng r2(600 + s);
    std::vector<BinaryMask> m = masks;
    const std::size_t bad = 1 + uniform_index(r2, 19);
    m[bad] = eval::corrupt_mask(seq.gts[bad], r2, 0.5).mask;
    if (engine::worst_frame(m, seq.gts).index == bad) ++found;
  }

  std::vector<double> consistency, quality_per_seq;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng r3(800 + s);
    const double speed = 0.5 + 0.4 * double(s);
    const eval::Sequence q = eval::translating_sequence(r3, 20, speed, {64, 64}, s % 2 == 1, s % 2 ? 8.0 : 6.0);
    const auto qm = propagate_from_gt(q);
    consistency.push_back(eval::temporal_consistency(qm));
    quality_per_seq.push_back(mean_iou(qm, q.gts));
  }
  const double r = eval::correlation(consistency, quality_per_seq);
  std::ostringstream os;
  os << "20-frame mean IOU " << fmt("%.3f", quality) << "; corrupted frame selected " << found
     << "/20; consistency vs IOU Pearson r " << fmt("%.3f", r) << " over 20 sequences (speed 0.5-8.1)";
  return {quality >= 0.8 && found == 20 && r > 0.0, os.str()};
}

// End-to-end determinism.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path dir = testing::temp_dir("acceptance_e2e");
  Rng rng(21);
  const eval::Scene sc = eval::textured_scene(rng);
  write_image(dir / "image.ppm", sc.image);
  const Click c = eval::first_click(sc.gt);
  std::ofstream(dir / "clicks.json") << "[{\"x\":" << c.x << ",\"y\":" << c.y
                                      << ",\"polarity\":\"pos\"},{\"x\":2,\"y\":2,\"polarity\":\"neg\"}]";
  const auto run = [&](const char* out) {
    const std::string cmd = std::string(CLICKSEG_CLI_PATH) + " segment --image " + (dir / "image.ppm").string() +
                            " --clicks " + (dir / "clicks.json").string() + " --seed 5 --out " + (dir / out).string() +
                            " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) && WEXITSTATUS(st) == 0;
  };
  const bool ran = run("a.pgm") && run("b.pgm");
  const bool same = ran && !slurp(dir / "a.pgm").empty() && slurp(dir / "a.pgm") == slurp(dir / "b.pgm");

  engine::Session s = engine::make_session("acc", sc.image, {});
  for (int k = 0; k < 5; ++k) {
    const auto cc = eval::correction_click(s.current_mask(), sc.gt);
    if (!cc) break;
    s = engine::refine_step(std::move(s), std::vector<Click>{*cc}).session;
  }
  const bool replayed = engine::replay(s).masks == s.masks;
  std::ostringstream os;
  os << "segment CLI twice " << (same ? "byte-identical" : "differs") << "; replay of " << s.step_count()
     << "-step session " << (replayed ? "reproduces" : "diverges from") << " the mask history";
  return {same && replayed, os.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_s;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria{
      {"metric/oracle suite", metric_oracles, 60},
      {"CRF correctness", crf_correctness, 120},
      {"simulator constraints", simulator_constraints, 60},
      {"clamp invariant", clamp_invariant, 0},
      {"mask-correction trend", correction_trend, 600},
      {"GrabCut baseline sanity", grabcut_sanity, 300},
      {"propagation + worst-frame", propagation_worst_frame, 300},
      {"end-to-end determinism", determinism, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + "s budget";
    }
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
