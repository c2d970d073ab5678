#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "hcrf/conhcrf.hpp"
#include "hcrf/evalbench.hpp"
#include "hcrf/supervoxel.hpp"

namespace hcrf {

struct PipelineConfig {
  SegmenterConfig segmenter;
  CrfConfig crf;
  int normal_k = 16;
  int baseline_k = 8;
  double baseline_tau = 0.01;
  std::uint64_t seed = 0;

  std::filesystem::path frame_t;
  std::filesystem::path frame_t1;
  std::optional<std::filesystem::path> initial_flow;  // baseline flow when absent
  std::optional<std::filesystem::path> labels;        // segmentation when absent
  std::optional<std::filesystem::path> ground_truth;
  std::optional<CameraIntrinsics> intrinsics;
  std::filesystem::path output;
  std::optional<std::filesystem::path> report;
};

// key=value lines; '#' starts a comment. Recognized keys:
//   alpha_position alpha_normal theta_position theta_normal beta knn
//   iterations tolerance supervoxel_size exact_leave_one_out region_term
//   normal_k position_weight normal_weight lloyd_iterations
//   baseline_k baseline_tau seed
// Unknown or repeated keys and unparsable values raise ConfigError with the
// line number.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

struct RunReport {
  double supervoxel_ms = 0.0;
  double pairwise_ms = 0.0;
  double highorder_ms = 0.0;
  double total_ms = 0.0;
  int iterations = 0;
  double final_delta = 0.0;
  std::size_t point_count = 0;
  std::size_t region_count = 0;
  std::optional<MetricsReport> metrics;          // refined flow vs ground truth
  std::optional<MetricsReport> initial_metrics;  // initial flow vs ground truth

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

void write_metrics(std::ostream& out, const MetricsReport& m, std::string_view prefix = "");
std::string write_report(const RunReport& report);
RunReport parse_report(std::string_view text);

// Rounds every component through float32, as a round trip through .sfl does.
FlowField quantize_to_float(const FlowField& flow);

// segment (or read labels) → baseline (or read) initial flow → refine →
// evaluate. Every input is read before any output is written.
RunReport run_pipeline(const PipelineConfig& config);

}  // namespace hcrf
