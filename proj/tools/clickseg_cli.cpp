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

// clickseg command-line tool.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "clickseg/eval/analytics.hpp"
#include "clickseg/eval/dataset.hpp"
#include "clickseg/service/server.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace clickseg;

namespace {

json read_json_file(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    fail(p.string() + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    write_file(path, j.dump(2) + "\n");
  }
}

template <class T>
T json_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(what + ": " + e.what());
  }
}

// Clicks file: a click array, or {"clicks": [...], "strokes": [...]}.
std::vector<Click> read_clicks(const std::string& path, double stroke_spacing) {
  if (path.empty()) return {};
  const json j = read_json_file(path);
  if (j.is_array()) return json_as<std::vector<Click>>(j, path);
  std::vector<Click> out;
  if (j.contains("clicks")) out = json_as<std::vector<Click>>(j.at("clicks"), path);
  if (j.contains("strokes")) {
    for (const Stroke& s : json_as<std::vector<Stroke>>(j.at("strokes"), path)) {
      const auto pts = rasterize_stroke(s, stroke_spacing);
      out.insert(out.end(), pts.begin(), pts.end());
    }
  }
  return out;
}

engine::SessionConfig read_session_config(const std::string& backend, const std::string& encoding,
                                          const std::string& crf) {
  engine::SessionConfig cfg;
  if (!backend.empty()) cfg.backend = json_as<BackendSpec>(read_json_file(backend), backend);
  if (!encoding.empty()) cfg.encoding = json_as<EncodingConfig>(read_json_file(encoding), encoding);
  if (!crf.empty()) cfg.crf = json_as<crf::CrfParams>(read_json_file(crf), crf);
  return cfg;
}

void apply_seed(BackendSpec& spec, std::uint64_t seed) {
  spec.oracle.seed = seed;
  spec.color.seed = seed;
  spec.grabcut.grabcut.seed = seed;
}

graphcut::BoxPrior parse_box(const std::string& s) {
  int v[4];
  char tail = 0;
  require(std::sscanf(s.c_str(), "%d,%d,%d,%d%c", &v[0], &v[1], &v[2], &v[3], &tail) == 4,
          "--box expects x0,y0,x1,y1");
  return {v[0], v[1], v[2], v[3]};
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    const std::string item = s.substr(pos, comma - pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(!item.empty() && used == item.size(), "expected a comma-separated integer list, got \"" + s + "\"");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

std::vector<Image> read_frames(const fs::path& dir) {
  require(fs::is_directory(dir), "no frame directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), dir.string() + ": no .ppm frames");
  std::vector<Image> frames;
  for (const auto& f : files) frames.push_back(read_image(f));
  return frames;
}

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive segmentation engine: refinement from clicks, CRF, GrabCut, propagation, evaluation."};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  double stroke_spacing = 5.0;

  // segment
  auto* seg = app.add_subcommand("segment", "One refinement step on an image");
  std::string seg_image, seg_clicks, seg_backend, seg_encoding, seg_crf, seg_prior, seg_out, seg_prob;
  seg->add_option("--image", seg_image, "Input PPM")->required();
  seg->add_option("--clicks", seg_clicks, "Clicks JSON (array, or object with clicks/strokes)");
  seg->add_option("--backend", seg_backend, "Backend spec JSON");
  seg->add_option("--encoding", seg_encoding, "Encoding config JSON");
  seg->add_option("--crf", seg_crf, "CRF params JSON");
  seg->add_option("--prior", seg_prior, "Current mask PGM to refine");
  seg->add_option("--out", seg_out, "Output mask PGM")->required();
  seg->add_option("--seed", seed, "Backend seed");
  seg->add_option("--stroke-spacing", stroke_spacing, "Pixels between clicks sampled along strokes");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Sample simulated clicks from a ground-truth mask");
  std::string sim_gt, sim_kind = "positive", sim_pred, sim_out;
  std::vector<std::string> sim_others;
  std::size_t sim_n = 5;
  int sim_strategy = 1;
  SamplingConfig sim_cfg;
  sim->add_option("--gt", sim_gt, "Ground-truth mask PGM")->required();
  sim->add_option("--kind", sim_kind, "positive | negative | correction | stroke")
      ->check(CLI::IsMember({"positive", "negative", "correction", "stroke"}));
  sim->add_option("--n", sim_n, "Number of clicks");
  sim->add_option("--strategy", sim_strategy, "Negative strategy 1, 2 or 3")->check(CLI::Range(1, 3));
  sim->add_option("--others", sim_others, "Other-object masks for strategy 2");
  sim->add_option("--pred", sim_pred, "Predicted mask for correction clicks");
  sim->add_option("--d-margin", sim_cfg.d_margin);
  sim->add_option("--d-step", sim_cfg.d_step);
  sim->add_option("--d-hull", sim_cfg.d_hull);
  sim->add_option("--seed", seed);
  sim->add_option("--out", sim_out, "Output JSON (default stdout)");

  // crf
  auto* crf_cmd = app.add_subcommand("crf", "Dense CRF refinement of a probability map");
  std::string crf_image, crf_prob, crf_params, crf_out, crf_out_prob;
  bool crf_reference = false;
  crf_cmd->add_option("--image", crf_image, "Input PPM")->required();
  crf_cmd->add_option("--prob", crf_prob, "Foreground probability PGM")->required();
  crf_cmd->add_option("--params", crf_params, "CRF params JSON");
  crf_cmd->add_flag("--reference", crf_reference, "Exact O(N^2) mean field (small images only)");
  crf_cmd->add_option("--out", crf_out, "Output mask PGM")->required();
  crf_cmd->add_option("--out-prob", crf_out_prob, "Output marginal PGM");

  // grabcut
  auto* gc = app.add_subcommand("grabcut", "GrabCut segmentation in a box");
  std::string gc_image, gc_box, gc_clicks, gc_init, gc_params, gc_out;
  gc->add_option("--image", gc_image, "Input PPM")->required();
  gc->add_option("--box", gc_box, "x0,y0,x1,y1 inclusive")->required();
  gc->add_option("--clicks", gc_clicks, "Clicks JSON");
  gc->add_option("--init", gc_init, "Initial foreground mask PGM");
  gc->add_option("--params", gc_params, "GrabCut params JSON");
  gc->add_option("--seed", seed);
  gc->add_option("--out", gc_out, "Output mask PGM")->required();

  // propagate
  auto* prop = app.add_subcommand("propagate", "Propagate a first-frame mask through a frame directory");
  std::string prop_frames, prop_first, prop_out, prop_params;
  std::size_t prop_components = 5;
  prop->add_option("--frames", prop_frames, "Directory of PPM frames (sorted by name)")->required();
  prop->add_option("--first-mask", prop_first, "Mask PGM for the first frame")->required();
  prop->add_option("--params", prop_params, "Propagation params JSON");
  prop->add_option("--components", prop_components, "GMM components per class");
  prop->add_option("--seed", seed);
  prop->add_option("--out", prop_out, "Output directory for NNNN.pgm masks")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluation protocols");
  ev->require_subcommand(1);
  auto* ev_clicks = ev->add_subcommand("clicks", "Clicks needed to reach an IOU threshold");
  std::string ec_root, ec_backend, ec_encoding, ec_crf, ec_report, ec_csv, ec_method, ec_placement = "pole";
  std::string ec_baseline = "engine";
  double ec_threshold = 0.9;
  int ec_max = 20, ec_margin = 0;
  ev_clicks->add_option("--root", ec_root, "Dataset root")->required();
  ev_clicks->add_option("--threshold", ec_threshold, "IOU threshold");
  ev_clicks->add_option("--max-clicks", ec_max, "Click cap");
  ev_clicks->add_option("--backend", ec_backend, "Backend spec JSON");
  ev_clicks->add_option("--encoding", ec_encoding, "Encoding config JSON");
  ev_clicks->add_option("--crf", ec_crf, "CRF params JSON");
  ev_clicks->add_option("--baseline", ec_baseline, "engine | grabcut (box = GT bounds + margin)")
      ->check(CLI::IsMember({"engine", "grabcut"}));
  ev_clicks->add_option("--box-margin", ec_margin, "GrabCut box margin around the GT");
  ev_clicks->add_option("--placement", ec_placement, "pole | sampler")->check(CLI::IsMember({"pole", "sampler"}));
  ev_clicks->add_option("--method", ec_method, "Method label for the report");
  ev_clicks->add_option("--seed", seed);
  ev_clicks->add_option("--report", ec_report, "Full JSON report (default stdout)");
  ev_clicks->add_option("--csv", ec_csv, "Aggregate CSV row file");

  auto* ev_refine = ev->add_subcommand("refine", "Correction of bad masks with k clicks");
  std::string er_root, er_k = "1,4,10", er_methods = "prior_mask,no_prior,grabcut", er_backend, er_encoding, er_crf;
  std::string er_out;
  int er_margin = 10;
  ev_refine->add_option("--root", er_root, "Dataset root (instances with mask.pgm, or sequences)")->required();
  ev_refine->add_option("--k", er_k, "Comma-separated click counts");
  ev_refine->add_option("--methods", er_methods, "Comma-separated: prior_mask, no_prior, grabcut");
  ev_refine->add_option("--backend", er_backend, "Backend spec JSON for the engine arms");
  ev_refine->add_option("--encoding", er_encoding, "Encoding config JSON");
  ev_refine->add_option("--crf", er_crf, "CRF params JSON");
  ev_refine->add_option("--box-margin", er_margin, "GrabCut heuristic box margin");
  ev_refine->add_option("--seed", seed);
  ev_refine->add_option("--out", er_out, "Output JSON (default stdout)");

  auto* ev_analyze = ev->add_subcommand("analyze", "Iteration histogram and temporal consistency of stored work");
  std::string ea_dir, ea_out;
  ev_analyze->add_option("--sessions", ea_dir, "Data directory or its sessions/ subdirectory")->required();
  ev_analyze->add_option("--out", ea_out, "Output JSON (default stdout)");

  // serve
  auto* srv = app.add_subcommand("serve", "HTTP API");
  int srv_port = service::kDefaultPort, srv_delay = 0;
  std::string srv_host = "127.0.0.1", srv_data = "clickseg-data", srv_static;
  srv->add_option("--port", srv_port, "Listen port");
  srv->add_option("--host", srv_host, "Listen address");
  srv->add_option("--data-dir", srv_data, "Session store (CLICKSEG_DATA_DIR overrides)");
  srv->add_option("--static-dir", srv_static, "Directory served at /");
  srv->add_option("--stroke-spacing", stroke_spacing);
  srv->add_option("--step-delay-ms", srv_delay, "Debugging: hold the session lock during each step");

  // synth
  auto* syn = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string syn_out, syn_kind = "mixed";
  std::size_t syn_n = 50, syn_frames = 20;
  bool syn_sequences = false, syn_corrupt = false;
  double syn_speed = 2.0;
  int syn_size = 64;
  syn->add_option("--out", syn_out, "Dataset root")->required();
  syn->add_option("--kind", syn_kind, "two_color | textured | mixed")
      ->check(CLI::IsMember({"two_color", "textured", "mixed"}));
  syn->add_option("--n", syn_n, "Instances");
  syn->add_option("--size", syn_size, "Image side in pixels")->check(CLI::Range(16, 1024));
  syn->add_flag("--corrupt", syn_corrupt, "Also write a degraded mask.pgm (IOU about 0.5)");
  syn->add_flag("--sequences", syn_sequences, "Write translating-object sequences");
  syn->add_option("--frames", syn_frames, "Frames per sequence");
  syn->add_option("--speed", syn_speed, "Object speed, px per frame");
  syn->add_option("--seed", seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (seg->parsed()) {
      engine::SessionConfig cfg = read_session_config(seg_backend, seg_encoding, seg_crf);
      if (seg->count("--seed")) apply_seed(cfg.backend, seed);
      const Image img = read_image(seg_image);
      std::optional<BinaryMask> prior;
      if (!seg_prior.empty()) prior = read_mask(seg_prior);
      const auto clicks = read_clicks(seg_clicks, stroke_spacing);
      auto r = engine::refine_step(engine::make_session("cli", img, cfg, prior), clicks);
      write_mask(seg_out, r.mask);
    } else if (sim->parsed()) {
      const BinaryMask gt = read_mask(sim_gt);
      sim_cfg.rng_seed = seed;
      json out;
      if (sim_kind == "positive") {
        out = sample_positive_clicks(gt, sim_n, sim_cfg);
      } else if (sim_kind == "negative") {
        std::vector<BinaryMask> others;
        for (const auto& p : sim_others) others.push_back(read_mask(p));
        out = sample_negative_clicks(gt, others, sim_n, static_cast<NegativeStrategy>(sim_strategy), sim_cfg);
      } else if (sim_kind == "correction") {
        require(!sim_pred.empty(), "--kind correction needs --pred");
        out = sample_correction_clicks(read_mask(sim_pred), gt, sim_n, sim_cfg);
      } else {
        out = simulate_stroke(gt, Polarity::positive, sim_cfg);
      }
      write_json_file(sim_out, out);
    } else if (crf_cmd->parsed()) {
      crf::CrfParams prm;
      if (!crf_params.empty()) prm = json_as<crf::CrfParams>(read_json_file(crf_params), crf_params);
      const Image img = read_image(crf_image);
      const ProbabilityMap p = read_probability(crf_prob);
      require_same_dims(img, p, "crf");
      const crf::Marginals q = crf_reference ? crf::mean_field_reference(p, img, prm) : crf::mean_field_fast(p, img, prm);
      BinaryMask m(p.dims());
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = q.fg[i] >= 0.5 ? 1 : 0;
      write_mask(crf_out, m);
      if (!crf_out_prob.empty()) write_probability(crf_out_prob, q.foreground());
    } else if (gc->parsed()) {
      graphcut::GrabCutParams prm;
      if (!gc_params.empty()) prm = json_as<graphcut::GrabCutParams>(read_json_file(gc_params), gc_params);
      if (gc->count("--seed")) prm.seed = seed;
      const Image img = read_image(gc_image);
      std::optional<BinaryMask> init;
      if (!gc_init.empty()) init = read_mask(gc_init);
      const auto clicks = read_clicks(gc_clicks, stroke_spacing);
      write_mask(gc_out, graphcut::grabcut_segment(img, parse_box(gc_box), clicks, init, prm));
    } else if (prop->parsed()) {
      PropagationParams prm;
      if (!prop_params.empty()) prm = json_as<PropagationParams>(read_json_file(prop_params), prop_params);
      const auto frames = read_frames(prop_frames);
      const BinaryMask first = read_mask(prop_first);
      const AppearanceModel model = fit_first_frame_model(frames[0], first, prop_components, 10, seed);
      const auto masks = propagate_sequence(frames, model, first, prm);
      fs::create_directories(prop_out);
      for (std::size_t t = 0; t < masks.size(); ++t)
        write_mask(fs::path(prop_out) / engine::frame_name(t, ".pgm"), masks[t]);
    } else if (ev_clicks->parsed()) {
      eval::ProtocolConfig cfg;
      cfg.iou_threshold = ec_threshold;
      cfg.max_clicks = ec_max;
      cfg.session = read_session_config(ec_backend, ec_encoding, ec_crf);
      cfg.placement = ec_placement == "pole" ? eval::Placement::pole : eval::Placement::sampler;
      cfg.seed = seed;
      const auto instances = eval::load_image_dataset(ec_root);
      require(!instances.empty(), ec_root + ": no instances");
      const std::string dataset = fs::path(ec_root).filename().string();
      eval::EvalReport rep;
      if (ec_baseline == "engine") {
        rep = eval::evaluate_clicks(instances, cfg, ec_method.empty() ? "engine" : ec_method, dataset);
      } else {
        graphcut::GrabCutParams gprm;
        gprm.seed = seed;
        rep = {ec_method.empty() ? "grabcut" : ec_method, dataset, ec_threshold, {}};
        for (const auto& inst : instances) {
          const auto box = graphcut::heuristic_box(inst.gt, {}, ec_margin);
          const auto run = eval::clicks_to_threshold(inst.gt, eval::grabcut_segmenter(inst.image, box, gprm), cfg);
          rep.records.push_back(eval::make_record(inst.id, run));
        }
      }
      write_json_file(ec_report, rep);
      if (!ec_csv.empty()) {
        const bool fresh = !fs::exists(ec_csv);
        std::string rows = fresh ? eval::csv_header() : std::string{};
        rows += eval::csv_row(rep);
        std::FILE* f = std::fopen(ec_csv.c_str(), "ab");
        require(f != nullptr, "cannot open " + ec_csv);
        std::fwrite(rows.data(), 1, rows.size(), f);
        std::fclose(f);
      }
    } else if (ev_refine->parsed()) {
      eval::RefinementConfig cfg;
      cfg.k_clicks = parse_ints(er_k);
      cfg.methods.clear();
      for (const auto& m : split(er_methods)) cfg.methods.push_back(eval::parse_refine_method(m));
      cfg.session = read_session_config(er_backend, er_encoding, er_crf);
      if (ev_refine->count("--seed")) apply_seed(cfg.session.backend, seed);
      cfg.grabcut.seed = seed;
      cfg.box_margin = er_margin;
      std::vector<eval::RefinementCase> cases;
      const auto images = eval::load_image_dataset(er_root);
      if (!images.empty()) {
        cases = eval::refinement_cases(images);
      } else {
        const auto seqs = eval::load_sequence_dataset(er_root);
        require(!seqs.empty(), er_root + ": no instances");
        std::vector<std::vector<BinaryMask>> masks;
        for (const auto& s : seqs) {
          const auto model = fit_first_frame_model(s.frames[0], s.gts[0], 5, 10, seed);
          masks.push_back(propagate_sequence(s.frames, model, s.gts[0]));
        }
        cases = eval::worst_frame_cases(seqs, masks);
      }
      write_json_file(er_out, eval::refinement_experiment(cases, cfg));
    } else if (ev_analyze->parsed()) {
      fs::path root = ea_dir;
      fs::path seq_root;
      if (fs::is_directory(root / "sessions")) {
        seq_root = root / "sequences";
        root = root / "sessions";
      }
      require(fs::is_directory(root), "no directory " + root.string());
      std::vector<engine::Session> sessions;
      for (const auto& e : fs::directory_iterator(root)) {
        const auto ext = e.path().extension();
        if (e.is_directory() && ext != ".tmp" && ext != ".old") sessions.push_back(engine::load_session(e.path()));
      }
      json out{{"sessions", sessions.size()}, {"iterations", eval::iteration_histogram(sessions)}};
      json consistency = json::object();
      if (!seq_root.empty() && fs::is_directory(seq_root)) {
        for (const auto& e : fs::directory_iterator(seq_root)) {
          const auto ext = e.path().extension();
          if (!e.is_directory() || ext == ".tmp" || ext == ".old") continue;
          const auto q = engine::load_sequence(e.path());
          if (q.masks.size() >= 2) consistency[q.id] = eval::temporal_consistency(q.masks);
        }
      }
      out["temporal_consistency"] = consistency;
      write_json_file(ea_out, out);
    } else if (srv->parsed()) {
      service::ServiceOptions opt;
      opt.data_dir = service::resolve_data_dir(srv_data);
      opt.stroke_spacing = stroke_spacing;
      opt.step_delay_ms = srv_delay;
      service::Service svc(opt);
      httplib::Server server;
      service::mount(server, svc, srv_static);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      require(server.bind_to_port(srv_host, srv_port), "cannot bind " + srv_host + ":" + std::to_string(srv_port));
      std::cerr << "clickseg: listening on " << srv_host << ":" << srv_port << ", data in " << opt.data_dir.string()
                << "\n";
      server.listen_after_bind();
    } else if (syn->parsed()) {
      const Dims d{syn_size, syn_size};
      const auto kind = eval::parse_scene_kind(syn_kind);
      fs::create_directories(syn_out);
      if (syn_sequences) {
        for (std::size_t i = 0; i < syn_n; ++i) {
          Rng rng(seed + i);
          const bool textured = kind == eval::SceneKind::textured || (kind == eval::SceneKind::mixed && i % 2 == 1);
          auto s = eval::translating_sequence(rng, syn_frames, syn_speed, d, textured, textured ? 8.0 : 6.0);
          eval::write_sequence_instance(syn_out, {"seq" + engine::frame_name(i, ""), s.frames, s.gts});
        }
      } else if (syn_corrupt) {
        for (const auto& inst : eval::corrupted_mask_suite(syn_n, kind, seed, d)) eval::write_image_instance(syn_out, inst);
      } else {
        for (std::size_t i = 0; i < syn_n; ++i) {
          Rng rng(seed + i);
          const bool textured = kind == eval::SceneKind::textured || (kind == eval::SceneKind::mixed && i % 2 == 1);
          auto s = textured ? eval::textured_scene(rng, d) : eval::two_color_scene(rng, d);
          eval::write_image_instance(syn_out, {"scene" + engine::frame_name(i, ""), s.image, s.gt, {}});
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
