#include "hcrf/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>

#include <Eigen/Geometry>

#include "hcrf/errors.hpp"

namespace hcrf {

namespace {

constexpr double kRelEps = 1e-12;

// Fixed-shape pairwise summation; the result does not depend on threading.
double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

double percent(const std::vector<double>& hits, std::size_t denom) {
  return denom == 0 ? 0.0 : 100.0 * pairwise_sum(hits) / static_cast<double>(denom);
}

}  // namespace

MetricsReport compute_metrics(const FlowField& pred, const FlowField& gt,
                              const PointCloud& positions,
                              const std::optional<CameraIntrinsics>& intrinsics) {
  const std::size_t n = gt.size();
  if (pred.size() != n || positions.size() != n) {
    throw InputError("metrics: prediction, ground truth and positions must be aligned");
  }
  if (intrinsics && !(intrinsics->fx > 0 && intrinsics->fy > 0)) {
    throw ConfigError("focal lengths must be positive");
  }

  std::vector<double> epe(n), strict(n), relax(n), outlier(n);
  std::vector<double> epe2(n, 0.0), acc2(n, 0.0), valid2(n, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const double e = (pred[i] - gt[i]).norm();
    const double rel = e / std::max(gt[i].norm(), kRelEps);
    epe[i] = e;
    strict[i] = (e < 0.05 || rel < 0.05) ? 1.0 : 0.0;
    relax[i] = (e < 0.1 || rel < 0.1) ? 1.0 : 0.0;
    outlier[i] = (e > 0.3 || rel > 0.1) ? 1.0 : 0.0;
    if (!intrinsics) continue;
    const auto project = [&](const Vec3& p) {
      return Eigen::Vector2d(intrinsics->fx * p.x() / p.z() + intrinsics->cx,
                             intrinsics->fy * p.y() / p.z() + intrinsics->cy);
    };
    const Vec3& p = positions[i];
    const Vec3 qp = p + pred[i];
    const Vec3 qg = p + gt[i];
    if (p.z() <= 0 || qp.z() <= 0 || qg.z() <= 0) continue;
    const Eigen::Vector2d base = project(p);
    const Eigen::Vector2d flow_gt = project(qg) - base;
    const double e2 = (project(qp) - project(qg)).norm();
    const double rel2 = e2 / std::max(flow_gt.norm(), kRelEps);
    valid2[i] = 1.0;
    epe2[i] = e2;
    acc2[i] = (e2 < 3.0 || rel2 < 0.05) ? 1.0 : 0.0;
  }

  MetricsReport report;
  report.point_count = n;
  if (n > 0) report.epe3d = pairwise_sum(epe) / static_cast<double>(n);
  report.acc3ds = percent(strict, n);
  report.acc3dr = percent(relax, n);
  report.outliers3d = percent(outlier, n);
  if (intrinsics) {
    const auto m = static_cast<std::size_t>(pairwise_sum(valid2));
    report.epe2d = m == 0 ? 0.0 : pairwise_sum(epe2) / static_cast<double>(m);
    report.acc2d = percent(acc2, m);
  }
  return report;
}

void SyntheticSceneSpec::validate() const {
  if (body_count < 1 || points_per_body < 1) {
    throw ConfigError("scene needs at least one body with at least one point");
  }
  if (rotation_min < 0 || rotation_max < rotation_min || translation_max < 0 ||
      cluster_radius < 0 || noise_sigma < 0) {
    throw ConfigError("scene magnitudes must be non-negative and rotation_min <= rotation_max");
  }
}

SyntheticScene generate_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.body_count))));
  const double spacing = spec.cluster_radius > 0 ? 6.0 * spec.cluster_radius : 1.0;

  std::vector<Vec3> points;
  std::vector<Vec3> flow;
  std::vector<int> labels;
  std::vector<RigidTransform> motions;
  for (int b = 0; b < spec.body_count; ++b) {
    Vec3 center((b % grid) * spacing, (b / grid) * spacing, 0.0);
    for (int c = 0; c < 3; ++c) center[c] += (unit(rng) - 0.5) * spec.cluster_radius;

    const std::size_t first = points.size();
    for (int k = 0; k < spec.points_per_body; ++k) {
      points.push_back(center + spec.cluster_radius * Vec3(gauss(rng), gauss(rng), gauss(rng)));
      labels.push_back(b);
    }
    Vec3 centroid = Vec3::Zero();
    for (std::size_t i = first; i < points.size(); ++i) centroid += points[i];
    centroid /= static_cast<double>(spec.points_per_body);

    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    if (axis.norm() < 1e-12) axis = Vec3::UnitZ();
    axis.normalize();
    const double degrees = spec.rotation_min + unit(rng) * (spec.rotation_max - spec.rotation_min);
    const double angle = degrees * std::numbers::pi / 180.0;
    Vec3 t(spec.translation_max * (2.0 * unit(rng) - 1.0),
           spec.translation_max * (2.0 * unit(rng) - 1.0),
           spec.translation_max * (2.0 * unit(rng) - 1.0));
    if (spec.fixed_translation) t = *spec.fixed_translation;

    RigidTransform motion;
    motion.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    motion.translation = centroid - motion.rotation * centroid + t;
    motions.push_back(motion);
    for (std::size_t i = first; i < points.size(); ++i) {
      flow.push_back(motion.rotation * (points[i] - centroid) + centroid + t - points[i]);
    }
  }

  PointCloud cloud_t(std::move(points));
  FlowField gt(std::move(flow));
  PointCloud cloud_t1 = warp(cloud_t, gt);
  FlowField initial = perturb_flow(gt, spec.noise_sigma, spec.seed ^ 0x9e3779b97f4a7c15ULL);
  return SyntheticScene{std::move(cloud_t), std::move(cloud_t1), std::move(gt),
                        std::move(initial), SupervoxelPartition(labels), std::move(motions)};
}

FlowField perturb_flow(const FlowField& flow, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw ConfigError("noise sigma must be non-negative");
  if (sigma == 0.0) return flow;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<Vec3> out = flow.vectors();
  for (auto& v : out) {
    for (int c = 0; c < 3; ++c) v[c] += gauss(rng);
  }
  return FlowField(std::move(out));
}

std::vector<SweepRow> sensitivity_sweep(const SyntheticSceneSpec& scene_spec,
                                        const std::vector<int>& desired_counts,
                                        const CrfConfig& config, const SweepOptions& options) {
  if (desired_counts.empty()) throw ConfigError("sweep needs at least one desired count");
  const auto scene = generate_scene(scene_spec);
  const auto normals = estimate_normals(scene.cloud_t, options.normal_k);
  const auto observations = make_observations(scene.cloud_t, normals, config);

  std::vector<SweepRow> rows;
  for (int desired : desired_counts) {
    SegmenterConfig seg = options.segmenter;
    seg.desired_point_count = desired;
    const auto partition = segment(scene.cloud_t, normals, seg);
    const auto result =
        refine(scene.cloud_t, scene.initial_flow, partition, observations, config);
    const auto metrics = compute_metrics(result.flow, scene.gt_flow, scene.cloud_t);
    rows.push_back({desired, partition.region_count(), metrics.epe3d});
  }
  return rows;
}

void write_sweep_table(std::ostream& out, const std::vector<SweepRow>& rows,
                       std::optional<double> input_epe3d) {
  out << std::left << std::setw(10) << "desired" << std::setw(10) << "regions"
      << "epe3d\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.desired_count << std::setw(10) << r.region_count
        << r.epe3d << '\n';
  }
  if (input_epe3d) out << std::left << std::setw(20) << "input" << *input_epe3d << '\n';
  out.unsetf(std::ios::floatfield);
}

}  // namespace hcrf
