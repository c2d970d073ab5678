#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hcrf/errors.hpp"
#include "hcrf/io.hpp"
#include "hcrf/pipeline.hpp"

using namespace hcrf;

TEST_CASE("parse_config reads every key") {
  const auto c = parse_config(
      "# comment line\n"
      "alpha_position = 0.3\nalpha_normal=0.2  # trailing comment\n"
      "theta_position = 0.4\ntheta_normal = 0.6\nbeta = 2\nknn = 8\niterations = 25\n"
      "tolerance = 1e-6\nexact_leave_one_out = true\nregion_term = naive\n"
      "supervoxel_size = 90\nposition_weight = 2\nnormal_weight = 0\nlloyd_iterations = 4\n"
      "normal_k = 12\nbaseline_k = 4\nbaseline_tau = 0.02\nseed = 17\n");
  REQUIRE(c.crf.kernels.size() == 2);
  CHECK(c.crf.kernels[0].alpha == 0.3);
  CHECK(c.crf.kernels[0].theta == 0.4);
  CHECK(c.crf.kernels[1].alpha == 0.2);
  CHECK(c.crf.kernels[1].theta == 0.6);
  CHECK(c.crf.beta == 2.0);
  CHECK(c.crf.knn_k == 8);
  CHECK(c.crf.max_iterations == 25);
  CHECK(c.crf.tolerance == 1e-6);
  CHECK(c.crf.exact_leave_one_out);
  CHECK(c.crf.region_term == RegionTerm::naive_mean);
  CHECK(c.segmenter.desired_point_count == 90);
  CHECK(c.segmenter.position_weight == 2.0);
  CHECK(c.segmenter.normal_weight == 0.0);
  CHECK(c.segmenter.lloyd_iterations == 4);
  CHECK(c.segmenter.seed == 17);
  CHECK(c.normal_k == 12);
  CHECK(c.baseline_k == 4);
  CHECK(c.baseline_tau == 0.02);
  CHECK(c.seed == 17);

  const auto defaults = parse_config("");
  CHECK(defaults.crf.beta == CrfConfig{}.beta);
  CHECK(defaults.segmenter.desired_point_count == 140);
}

TEST_CASE("parse_config errors name the line") {
  CHECK_THROWS_WITH_AS(parse_config("beta = 1\nbogus = 2\n"), "line 2: unknown key 'bogus'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("beta = 1\nbeta = 2\n"), "line 2: duplicate key 'beta'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("knn = many\n"), "line 1: invalid value 'many' for knn", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("just text\n"), "line 1: expected key=value", ConfigError);
  CHECK_THROWS_AS(parse_config("beta = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("supervoxel_size = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("exact_leave_one_out = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("baseline_tau = 0\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("report round trip is exact") {
  RunReport r;
  r.supervoxel_ms = 115.1;
  r.pairwise_ms = 12.3;
  r.highorder_ms = 100.8;
  r.total_ms = 228.2;
  r.iterations = 7;
  r.final_delta = 3.3e-6;
  r.point_count = 8192;
  r.region_count = 59;
  MetricsReport m;
  m.epe3d = 0.0781234567891;
  m.acc3ds = 12.5;
  m.acc3dr = 50.0;
  m.outliers3d = 1.0 / 3.0;
  m.epe2d = 2.5;
  m.acc2d = 99.0;
  m.point_count = 8192;
  r.metrics = m;
  MetricsReport init = m;
  init.epe3d = 0.1;
  init.epe2d.reset();
  init.acc2d.reset();
  r.initial_metrics = init;
  const auto text = write_report(r);
  CHECK(text.find("supervoxel_ms: ") == 0);
  CHECK(text.find("initial_epe3d: ") != std::string::npos);
  CHECK(parse_report(text) == r);
  CHECK_THROWS_AS(parse_report("iterations: 3\n"), InputError);
  CHECK_THROWS_AS(parse_report("garbage\n"), InputError);
}

TEST_CASE("quantize_to_float") {
  const FlowField f({{0.1, 1.0 / 3.0, -2.0}});
  const auto q = quantize_to_float(f);
  CHECK(q[0].x() == static_cast<double>(0.1f));
  CHECK(q[0].z() == -2.0);
  CHECK(quantize_to_float(q) == q);
}

TEST_CASE("run_pipeline reads all inputs before writing") {
  const auto dir = std::filesystem::temp_directory_path() / "hcrf_pipeline_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  SyntheticSceneSpec spec;
  spec.points_per_body = 60;
  const auto scene = generate_scene(spec);
  io::write_ply(dir / "t.ply", scene.cloud_t);
  io::write_ply(dir / "t1.ply", scene.cloud_t1);
  io::write_sfl(dir / "gt.sfl", scene.gt_flow);

  PipelineConfig cfg;
  cfg.frame_t = dir / "t.ply";
  cfg.frame_t1 = dir / "t1.ply";
  cfg.ground_truth = dir / "gt.sfl";
  cfg.output = dir / "out.sfl";
  cfg.report = dir / "report.txt";
  cfg.segmenter.desired_point_count = 60;
  const auto report = run_pipeline(cfg);
  CHECK(report.point_count == 300);
  CHECK(report.region_count == 5);
  REQUIRE(report.metrics.has_value());
  std::ifstream in(dir / "report.txt");
  std::stringstream text;
  text << in.rdbuf();
  const auto parsed = parse_report(text.str());
  CHECK(parsed.iterations == report.iterations);
  CHECK(parsed.metrics->epe3d == report.metrics->epe3d);
  CHECK(io::read_sfl(dir / "out.sfl").size() == 300);

  PipelineConfig broken = cfg;
  broken.output = dir / "never.sfl";
  broken.labels = dir / "missing_labels.txt";
  CHECK_THROWS_AS(run_pipeline(broken), InputError);
  CHECK_FALSE(std::filesystem::exists(dir / "never.sfl"));
  std::filesystem::remove_all(dir);
}
