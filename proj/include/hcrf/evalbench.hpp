#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hcrf/conhcrf.hpp"
#include "hcrf/geometry.hpp"
#include "hcrf/supervoxel.hpp"

namespace hcrf {

struct MetricsReport {
  double epe3d = 0.0;       // meters
  double acc3ds = 0.0;      // percent
  double acc3dr = 0.0;      // percent
  double outliers3d = 0.0;  // percent
  std::optional<double> epe2d;  // pixels
  std::optional<double> acc2d;  // percent
  std::size_t point_count = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

// Relative errors divide by max(‖gt_i‖, 1e-12). 3D thresholds:
//   Acc3DS: epe < 0.05 m or rel < 5 %;  Acc3DR: epe < 0.1 m or rel < 10 %;
//   Outliers3D: epe > 0.3 m or rel > 10 %.
// With intrinsics, p and p + flow are projected by a pinhole model; points
// with z ≤ 0 at either end are left out of the 2D statistics.
MetricsReport compute_metrics(const FlowField& pred, const FlowField& gt,
                              const PointCloud& positions,
                              const std::optional<CameraIntrinsics>& intrinsics = std::nullopt);

struct SyntheticSceneSpec {
  int body_count = 5;
  int points_per_body = 200;
  double rotation_min = 0.0;  // degrees
  double rotation_max = 20.0;  // degrees
  double translation_max = 0.5;  // meters, per axis
  double cluster_radius = 0.5;  // meters, Gaussian std of each body
  double noise_sigma = 0.05;  // meters, noise on the emitted initial flow
  std::uint64_t seed = 0;
  std::optional<Vec3> fixed_translation;  // overrides the random translation

  void validate() const;
};

struct SyntheticScene {
  PointCloud cloud_t;
  PointCloud cloud_t1;
  FlowField gt_flow;
  FlowField initial_flow;  // gt_flow perturbed by noise_sigma
  SupervoxelPartition body_labels;
  std::vector<RigidTransform> body_motions;  // about the world origin
};

SyntheticScene generate_scene(const SyntheticSceneSpec& spec);

FlowField perturb_flow(const FlowField& flow, double sigma, std::uint64_t seed);

struct SweepRow {
  int desired_count = 0;
  std::size_t region_count = 0;
  double epe3d = 0.0;
};

struct SweepOptions {
  int normal_k = 16;
  SegmenterConfig segmenter;  // desired_point_count is overridden per row
};

std::vector<SweepRow> sensitivity_sweep(const SyntheticSceneSpec& scene,
                                        const std::vector<int>& desired_counts,
                                        const CrfConfig& config,
                                        const SweepOptions& options = {});

void write_sweep_table(std::ostream& out, const std::vector<SweepRow>& rows,
                       std::optional<double> input_epe3d = std::nullopt);

}  // namespace hcrf
