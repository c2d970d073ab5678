// Command-line front end: segment, baseline-flow, embed, refine, eval, synth,
// sweep and pipeline. Exit codes: 0 ok, 1 bad input file, 2 config error,
// 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hcrf/errors.hpp"
#include "hcrf/evalbench.hpp"
#include "hcrf/flowembed.hpp"
#include "hcrf/io.hpp"
#include "hcrf/parallel.hpp"
#include "hcrf/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hcrf;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string threads = "auto";
  std::optional<std::string> config;
};

PipelineConfig base_config(const Globals& g) {
  PipelineConfig cfg = g.config ? load_config(*g.config) : parse_config("");
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.segmenter.seed = *g.seed;
  }
  return cfg;
}

void apply_threads(const std::string& threads) {
  if (threads == "auto") return;
  int n = 0;
  try {
    n = std::stoi(threads);
  } catch (const std::exception&) {
    throw ConfigError("--threads expects a positive integer or 'auto'");
  }
  if (n < 1) throw ConfigError("--threads expects a positive integer or 'auto'");
  set_thread_count(n);
}

std::optional<CameraIntrinsics> parse_intrinsics(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--intrinsics expects fx,fy,cx,cy");
    }
  }
  if (v.size() != 4) throw ConfigError("--intrinsics expects fx,fy,cx,cy");
  return CameraIntrinsics{v[0], v[1], v[2], v[3]};
}

PointCloud with_default_features(const PointCloud& cloud) {
  if (cloud.has_features()) return cloud;
  std::vector<Eigen::VectorXd> f(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) f[i] = cloud[i];
  return cloud.with_features(std::move(f));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene flow refinement with continuous high-order CRFs"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--threads", g.threads, "Worker threads (n or auto)");
  app.add_option("--config", g.config, "key=value configuration file");

  // segment
  auto* seg = app.add_subcommand("segment", "Over-segment a cloud into supervoxels");
  std::string seg_input, seg_output;
  std::optional<int> seg_desired;
  seg->add_option("--input", seg_input, "Input PLY")->required();
  seg->add_option("--desired", seg_desired, "Desired points per supervoxel");
  seg->add_option("--output", seg_output, "Output label file")->required();

  // baseline-flow
  auto* base = app.add_subcommand("baseline-flow", "Softmax nearest-neighbor initial flow");
  std::string base_t, base_t1, base_out;
  std::optional<int> base_k;
  std::optional<double> base_tau;
  base->add_option("--frame-t", base_t)->required();
  base->add_option("--frame-t1", base_t1)->required();
  base->add_option("--k", base_k, "Neighbors in frame t+1");
  base->add_option("--tau", base_tau, "Softmax temperature (m^2)");
  base->add_option("--output", base_out, "Output .sfl")->required();

  // embed
  auto* emb = app.add_subcommand("embed", "Position-aware flow embeddings (forward pass)");
  std::string emb_t, emb_t1, emb_out, emb_weights;
  int emb_k = 16, emb_cost = 16, emb_pos = 8, emb_hidden = 32;
  emb->add_option("--frame-t", emb_t)->required();
  emb->add_option("--frame-t1", emb_t1)->required();
  emb->add_option("--weights", emb_weights, "Tensor file; seeded weights when omitted");
  emb->add_option("--k", emb_k, "Neighbors in frame t+1");
  emb->add_option("--cost-dim", emb_cost);
  emb->add_option("--pos-dim", emb_pos);
  emb->add_option("--hidden", emb_hidden);
  emb->add_option("--output", emb_out, "Output ASCII table")->required();

  // refine and pipeline share their flags.
  struct RefineArgs {
    std::string frame_t, frame_t1, initial, labels = "auto", output, report, gt, intrinsics;
  };
  RefineArgs ref_args, pipe_args;
  const auto add_refine_flags = [](CLI::App* sub, RefineArgs& a, bool initial_required) {
    sub->add_option("--frame-t", a.frame_t)->required();
    sub->add_option("--frame-t1", a.frame_t1)->required();
    auto* init = sub->add_option("--initial-flow", a.initial, "Initial flow .sfl");
    if (initial_required) init->required();
    sub->add_option("--labels", a.labels, "Label file or 'auto'");
    sub->add_option("--output", a.output, "Refined flow .sfl")->required();
    sub->add_option("--report", a.report, "Report file (key: value lines)");
    sub->add_option("--gt", a.gt, "Ground-truth .sfl for metrics");
    sub->add_option("--intrinsics", a.intrinsics, "fx,fy,cx,cy for 2D metrics");
  };
  auto* ref = app.add_subcommand("refine", "Refine an initial flow with mean-field inference");
  add_refine_flags(ref, ref_args, true);
  auto* pipe = app.add_subcommand("pipeline", "segment -> initial flow -> refine -> eval");
  add_refine_flags(pipe, pipe_args, false);

  // eval
  auto* ev = app.add_subcommand("eval", "Scene flow metrics");
  std::string ev_pred, ev_gt, ev_t, ev_out, ev_intr;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_option("--frame-t", ev_t)->required();
  ev->add_option("--intrinsics", ev_intr, "fx,fy,cx,cy for 2D metrics");
  ev->add_option("--output", ev_out, "Write the report here instead of stdout");

  // synth and sweep share scene flags.
  SyntheticSceneSpec scene;
  const auto add_scene_flags = [&scene](CLI::App* sub) {
    sub->add_option("--bodies", scene.body_count);
    sub->add_option("--points-per-body", scene.points_per_body);
    sub->add_option("--rotation-min", scene.rotation_min, "degrees");
    sub->add_option("--rotation-max", scene.rotation_max, "degrees");
    sub->add_option("--translation-max", scene.translation_max, "meters");
    sub->add_option("--cluster-radius", scene.cluster_radius, "meters");
    sub->add_option("--noise", scene.noise_sigma, "initial-flow noise sigma (m)");
  };
  auto* syn = app.add_subcommand("synth", "Synthetic multi-body rigid scene");
  std::string syn_dir;
  add_scene_flags(syn);
  syn->add_option("--out-dir", syn_dir)->required();

  auto* sw = app.add_subcommand("sweep", "Supervoxel size sensitivity table");
  std::vector<int> sw_desired{80, 100, 140, 200};
  add_scene_flags(sw);
  sw->add_option("--desired", sw_desired, "Desired counts")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    apply_threads(g.threads);
    PipelineConfig cfg = base_config(g);

    if (*seg) {
      const auto ply = io::read_ply(fs::path(seg_input));
      if (seg_desired) cfg.segmenter.desired_point_count = *seg_desired;
      cfg.segmenter.validate();
      NormalField normals;
      if (ply.normals) {
        normals.normals = *ply.normals;
        normals.valid.assign(ply.cloud.size(), true);
      } else {
        normals = estimate_normals(ply.cloud, cfg.normal_k);
      }
      const auto partition = segment(ply.cloud, normals, cfg.segmenter);
      io::write_labels(fs::path(seg_output), partition);
    } else if (*base) {
      const auto t = io::read_ply(fs::path(base_t));
      const auto t1 = io::read_ply(fs::path(base_t1));
      const auto flow = baseline_initial_flow(t.cloud, t1.cloud, base_k.value_or(cfg.baseline_k),
                                              base_tau.value_or(cfg.baseline_tau));
      io::write_sfl(fs::path(base_out), flow);
    } else if (*emb) {
      const auto t = with_default_features(io::read_ply(fs::path(emb_t)).cloud);
      const auto t1 = with_default_features(io::read_ply(fs::path(emb_t1)).cloud);
      EmbeddingConfig ecfg;
      if (emb_weights.empty()) {
        ecfg = seeded_embedding_config(t.feature_dim(), emb_cost, emb_pos, emb_hidden, emb_k,
                                       cfg.seed);
      } else {
        std::ifstream in(emb_weights);
        if (!in) throw InputError("cannot open " + emb_weights);
        ecfg = read_weights(in, emb_k);
      }
      const auto graph = knn_search(t1, t, ecfg.neighbor_k);
      const auto e = flow_embedding(t, t1, graph, ecfg);
      std::ostringstream out;
      out.precision(std::numeric_limits<double>::max_digits10);
      for (Eigen::Index i = 0; i < e.rows(); ++i) {
        out << i;
        for (Eigen::Index c = 0; c < e.cols(); ++c) out << ' ' << e(i, c);
        out << '\n';
      }
      write_text(fs::path(emb_out), out.str());
    } else if (*ref || *pipe) {
      const RefineArgs& a = *ref ? ref_args : pipe_args;
      cfg.frame_t = a.frame_t;
      cfg.frame_t1 = a.frame_t1;
      if (!a.initial.empty()) cfg.initial_flow = a.initial;
      if (a.labels != "auto") cfg.labels = a.labels;
      if (!a.gt.empty()) cfg.ground_truth = a.gt;
      cfg.intrinsics = parse_intrinsics(a.intrinsics);
      cfg.output = a.output;
      if (!a.report.empty()) cfg.report = a.report;
      const auto report = run_pipeline(cfg);
      if (a.report.empty()) std::cout << write_report(report);
    } else if (*ev) {
      const auto intr = parse_intrinsics(ev_intr);
      const auto pred = io::read_sfl(fs::path(ev_pred));
      const auto gt = io::read_sfl(fs::path(ev_gt));
      const auto t = io::read_ply(fs::path(ev_t));
      const auto m = compute_metrics(pred, gt, t.cloud, intr);
      std::ostringstream out;
      write_metrics(out, m);
      out << "point_count: " << m.point_count << '\n';
      if (ev_out.empty()) {
        std::cout << out.str();
      } else {
        write_text(fs::path(ev_out), out.str());
      }
    } else if (*syn) {
      scene.seed = cfg.seed;
      const auto s = generate_scene(scene);
      const fs::path dir(syn_dir);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw InputError("cannot create " + dir.string());
      io::write_ply(dir / "frame_t.ply", s.cloud_t);
      io::write_ply(dir / "frame_t1.ply", s.cloud_t1);
      io::write_sfl(dir / "gt.sfl", s.gt_flow);
      io::write_sfl(dir / "initial.sfl", s.initial_flow);
      io::write_labels(dir / "labels.txt", s.body_labels);
    } else if (*sw) {
      scene.seed = cfg.seed;
      SweepOptions opts;
      opts.normal_k = cfg.normal_k;
      opts.segmenter = cfg.segmenter;
      const auto rows = sensitivity_sweep(scene, sw_desired, cfg.crf, opts);
      const auto s = generate_scene(scene);
      const auto input = compute_metrics(s.initial_flow, s.gt_flow, s.cloud_t);
      write_sweep_table(std::cout, rows, input.epe3d);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
