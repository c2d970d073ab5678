#pragma once

#include <cstdint>
#include <vector>

#include "hcrf/geometry.hpp"

namespace hcrf {

// Disjoint labeling of a cloud into non-empty regions.
class SupervoxelPartition {
 public:
  SupervoxelPartition() = default;
  // Labels may be arbitrary non-negative ids; they are compacted to
  // 0..R-1 preserving their numeric order.
  explicit SupervoxelPartition(const std::vector<int>& labels);

  static SupervoxelPartition single_region(std::size_t n);

  std::size_t point_count() const { return labels_.size(); }
  std::size_t region_count() const { return regions_.size(); }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::vector<std::size_t>>& regions() const { return regions_; }

  friend bool operator==(const SupervoxelPartition&, const SupervoxelPartition&) = default;

 private:
  std::vector<int> labels_;
  std::vector<std::vector<std::size_t>> regions_;
};

struct SegmenterConfig {
  int desired_point_count = 140;
  double position_weight = 1.0;
  double normal_weight = 0.5;
  int lloyd_iterations = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

// Seeded farthest-point initialization followed by Lloyd iterations under
// d = w_p·‖p − c‖ + w_n·(1 − |n·n_c|). Produces round(n / desired) regions.
SupervoxelPartition segment(const PointCloud& cloud, const NormalField& normals,
                            const SegmenterConfig& config);

}  // namespace hcrf
