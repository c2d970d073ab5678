#include <random>
#include <sstream>

#include "doctest.h"
#include "hcrf/errors.hpp"
#include "hcrf/evalbench.hpp"
#include "hcrf/rigidfit.hpp"
#include "oracles.hpp"

using namespace hcrf;

TEST_CASE("metrics of a perfect prediction") {
  std::mt19937_64 rng(1);
  const FlowField gt(oracle::random_points(100, rng));
  const PointCloud pos(oracle::random_points(100, rng));
  const auto m = compute_metrics(gt, gt, pos);
  CHECK(m.epe3d == 0.0);
  CHECK(m.acc3ds == 100.0);
  CHECK(m.acc3dr == 100.0);
  CHECK(m.outliers3d == 0.0);
  CHECK(m.point_count == 100);
  CHECK_FALSE(m.epe2d.has_value());
}

TEST_CASE("metric threshold walk-through") {
  const FlowField gt(std::vector<Vec3>(10, Vec3(1, 0, 0)));
  const FlowField pred(std::vector<Vec3>(10, Vec3(1.07, 0, 0)));
  const PointCloud pos(std::vector<Vec3>(10, Vec3(0, 0, 5)));
  const auto m = compute_metrics(pred, gt, pos);
  CHECK(std::abs(m.epe3d - 0.07) < 1e-12);
  CHECK(m.acc3ds == 0.0);
  CHECK(m.acc3dr == 100.0);
  CHECK(m.outliers3d == 0.0);
}

TEST_CASE("metrics agree with an independent evaluator") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> scale(0.01, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 500;
    const auto gt = oracle::random_points(n, rng, scale(rng));
    auto pred = gt;
    const double noise = scale(rng) * 0.3;
    for (auto& p : pred) p += oracle::random_points(1, rng, noise)[0];
    const auto m = compute_metrics(FlowField(pred), FlowField(gt), PointCloud(oracle::random_points(n, rng)));
    const auto o = oracle::metrics(pred, gt);
    CHECK(std::abs(m.epe3d - o.epe3d) < 1e-9);
    CHECK(std::abs(m.acc3ds - o.acc3ds) < 1e-9);
    CHECK(std::abs(m.acc3dr - o.acc3dr) < 1e-9);
    CHECK(std::abs(m.outliers3d - o.outliers3d) < 1e-9);
  }
}

TEST_CASE("metrics are monotone in the error scale") {
  std::mt19937_64 rng(3);
  const auto gt = oracle::random_points(300, rng, 0.5);
  const auto err = oracle::random_points(300, rng, 0.2);
  const PointCloud pos(oracle::random_points(300, rng));
  MetricsReport prev{};
  for (int s = 0; s <= 20; ++s) {
    std::vector<Vec3> pred;
    for (std::size_t i = 0; i < gt.size(); ++i) pred.push_back(gt[i] + 0.1 * s * err[i]);
    const auto m = compute_metrics(FlowField(pred), FlowField(gt), pos);
    if (s > 0) {
      CHECK(m.epe3d >= prev.epe3d);
      CHECK(m.acc3ds <= prev.acc3ds);
      CHECK(m.acc3dr <= prev.acc3dr);
      CHECK(m.outliers3d >= prev.outliers3d);
    }
    prev = m;
  }
}

TEST_CASE("2D metrics use a pinhole projection") {
  const CameraIntrinsics cam{100, 100, 50, 50};
  const PointCloud pos({{0, 0, 2}, {1, 1, 4}, {0, 0, -1}});
  const FlowField gt({{0.1, 0, 0}, {0, 0.2, 0}, {1, 1, 1}});
  const FlowField pred({{0.1, 0.04, 0}, {0, 0.2, 0}, {5, 5, 5}});
  const auto m = compute_metrics(pred, gt, pos, cam);
  REQUIRE(m.epe2d.has_value());
  // Point 0 moves 0.04 m in y at z = 2: 100·0.04/2 = 2 px. Point 1 is exact;
  // point 2 sits behind the camera and is excluded.
  CHECK(std::abs(*m.epe2d - 1.0) < 1e-12);
  CHECK(*m.acc2d == 100.0);
  CHECK_THROWS_AS(compute_metrics(pred, FlowField::zeros(2), pos), InputError);
}

TEST_CASE("generate_scene pure translation") {
  SyntheticSceneSpec spec;
  spec.rotation_max = 0;
  spec.fixed_translation = Vec3(1, 0, 0);
  const auto s = generate_scene(spec);
  for (std::size_t i = 0; i < s.gt_flow.size(); ++i) CHECK((s.gt_flow[i] - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("generate_scene is deterministic and round-trips through the rigid fit") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticSceneSpec spec;
    spec.seed = seed;
    const auto a = generate_scene(spec);
    const auto b = generate_scene(spec);
    CHECK(a.cloud_t.points() == b.cloud_t.points());
    CHECK(a.gt_flow == b.gt_flow);
    CHECK(a.initial_flow == b.initial_flow);
    CHECK(a.cloud_t.size() == 1000);
    CHECK(a.body_labels.region_count() == 5);
    for (std::size_t r = 0; r < a.body_labels.region_count(); ++r) {
      std::vector<Vec3> src, dst;
      for (auto i : a.body_labels.regions()[r]) {
        src.push_back(a.cloud_t[i]);
        dst.push_back(a.cloud_t1[i]);
      }
      const auto fit = kabsch_fit(Correspondences(src, dst));
      CHECK((fit.transform.rotation - a.body_motions[r].rotation).norm() < 1e-6);
      CHECK((fit.transform.translation - a.body_motions[r].translation).norm() < 1e-6);
      const double angle = std::acos(std::clamp((fit.transform.rotation.trace() - 1) / 2, -1.0, 1.0));
      CHECK(angle <= 20.0 * std::numbers::pi / 180.0 + 1e-9);
      for (auto i : a.body_labels.regions()[r]) {
        CHECK((rigid_flow_at(fit.transform, a.cloud_t[i]) - a.gt_flow[i]).norm() < 1e-6);
      }
    }
  }
}

TEST_CASE("perturb_flow statistics") {
  const FlowField zero = FlowField::zeros(10000);
  CHECK(perturb_flow(zero, 0.0, 1) == zero);
  const auto noisy = perturb_flow(zero, 0.05, 7);
  CHECK(noisy == perturb_flow(zero, 0.05, 7));
  for (int a = 0; a < 3; ++a) {
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) mean += noisy[i][a] / 1e4;
    for (std::size_t i = 0; i < noisy.size(); ++i) sq += (noisy[i][a] - mean) * (noisy[i][a] - mean);
    const double sd = std::sqrt(sq / (1e4 - 1));
    CHECK(sd >= 0.048);
    CHECK(sd <= 0.052);
  }
  CHECK_THROWS_AS(perturb_flow(zero, -1.0, 0), ConfigError);
}

TEST_CASE("sensitivity sweep") {
  SyntheticSceneSpec spec;
  spec.points_per_body = 150;
  spec.seed = 4;
  CrfConfig cfg;
  const auto rows = sensitivity_sweep(spec, {80, 100, 140, 200}, cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[2].desired_count == 140);
  CHECK(rows[2].region_count == 5);

  const auto pair = sensitivity_sweep(spec, {140, 20}, cfg);
  CHECK(pair[0].epe3d <= pair[1].epe3d);

  std::ostringstream out;
  write_sweep_table(out, rows, 0.08);
  const auto text = out.str();
  CHECK(text.find("140") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') >= 5);
  CHECK_THROWS_AS(sensitivity_sweep(spec, {}, cfg), ConfigError);
}
