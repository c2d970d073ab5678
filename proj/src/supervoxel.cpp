#include "hcrf/supervoxel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "hcrf/errors.hpp"

namespace hcrf {

SupervoxelPartition::SupervoxelPartition(const std::vector<int>& labels) {
  if (labels.empty()) throw InputError("partition must cover at least one point");
  std::map<int, int> remap;
  for (int l : labels) {
    if (l < 0) throw InputError("region labels must be non-negative");
    remap.emplace(l, 0);
  }
  int next = 0;
  for (auto& [from, to] : remap) to = next++;
  labels_.reserve(labels.size());
  regions_.resize(remap.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = remap[labels[i]];
    labels_.push_back(l);
    regions_[l].push_back(i);
  }
}

SupervoxelPartition SupervoxelPartition::single_region(std::size_t n) {
  return SupervoxelPartition(std::vector<int>(n, 0));
}

void SegmenterConfig::validate() const {
  if (desired_point_count < 1) throw ConfigError("desired point count must be >= 1");
  if (position_weight < 0 || normal_weight < 0) {
    throw ConfigError("segmenter weights must be non-negative");
  }
  if (position_weight <= 0 && normal_weight <= 0) {
    throw ConfigError("at least one segmenter weight must be positive");
  }
  if (lloyd_iterations < 1) throw ConfigError("lloyd iterations must be >= 1");
}

namespace {

struct Center {
  Vec3 position;
  Vec3 normal;
};

class Segmenter {
 public:
  Segmenter(const PointCloud& cloud, const NormalField& normals, const SegmenterConfig& config)
      : cloud_(cloud), normals_(normals.normals), config_(config),
        labels_(cloud.size(), 0), cost_(cloud.size(), 0.0) {}

  std::vector<int> run(std::size_t region_count) {
    seed_farthest_point(region_count);
    for (int it = 0; it < config_.lloyd_iterations; ++it) {
      assign();
      update_centers();
    }
    assign();
    repair_empty();
    return labels_;
  }

 private:
  double distance(std::size_t i, const Center& c) const {
    return config_.position_weight * (cloud_[i] - c.position).norm() +
           config_.normal_weight * (1.0 - std::abs(normals_[i].dot(c.normal)));
  }

  void seed_farthest_point(std::size_t region_count) {
    const std::size_t n = cloud_.size();
    std::mt19937_64 rng(config_.seed);
    std::size_t current = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    centers_.clear();
    for (std::size_t r = 0; r < region_count; ++r) {
      centers_.push_back({cloud_[current], normals_[current]});
      std::size_t farthest = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = std::min(nearest[i], (cloud_[i] - cloud_[current]).squaredNorm());
        if (nearest[i] > best) {
          best = nearest[i];
          farthest = i;
        }
      }
      current = farthest;
    }
  }

  void assign() {
    const auto n = static_cast<std::ptrdiff_t>(cloud_.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      int best = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < centers_.size(); ++r) {
        const double d = distance(i, centers_[r]);
        if (d < best_cost) {
          best_cost = d;
          best = static_cast<int>(r);
        }
      }
      labels_[i] = best;
      cost_[i] = best_cost;
    }
  }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(centers_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i);
    return out;
  }

  void update_centers() {
    const auto groups = members();
    std::vector<std::size_t> empty;
    const auto r_count = static_cast<std::ptrdiff_t>(centers_.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < r_count; ++r) {
      const auto& g = groups[r];
      if (g.empty()) continue;
      Vec3 pos = Vec3::Zero();
      Vec3 nrm = Vec3::Zero();
      const Vec3 ref = centers_[r].normal;
      for (auto i : g) {
        pos += cloud_[i];
        // Normals are unoriented; align with the current center first.
        nrm += normals_[i].dot(ref) < 0 ? Vec3(-normals_[i]) : normals_[i];
      }
      centers_[r].position = pos / static_cast<double>(g.size());
      if (nrm.norm() > 1e-12) centers_[r].normal = nrm.normalized();
    }
    for (std::size_t r = 0; r < centers_.size(); ++r) {
      if (groups[r].empty()) empty.push_back(r);
    }
    reseed(empty);
  }

  // Empty clusters take the points currently worst served by their center.
  void reseed(const std::vector<std::size_t>& empty) {
    if (empty.empty()) return;
    std::vector<std::size_t> order(cloud_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cost_[a] > cost_[b]; });
    for (std::size_t e = 0; e < empty.size() && e < order.size(); ++e) {
      centers_[empty[e]] = {cloud_[order[e]], normals_[order[e]]};
    }
  }

  // Guarantees no empty region after the final assignment by moving the
  // highest-cost point of a multi-point region into each empty one.
  void repair_empty() {
    auto groups = members();
    std::vector<std::size_t> sizes(groups.size());
    for (std::size_t r = 0; r < groups.size(); ++r) sizes[r] = groups[r].size();
    std::vector<std::size_t> order(cloud_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cost_[a] > cost_[b]; });
    std::size_t cursor = 0;
    for (std::size_t r = 0; r < groups.size(); ++r) {
      if (sizes[r] != 0) continue;
      while (sizes[labels_[order[cursor]]] < 2) ++cursor;
      const std::size_t i = order[cursor++];
      --sizes[labels_[i]];
      labels_[i] = static_cast<int>(r);
      ++sizes[r];
    }
  }

  const PointCloud& cloud_;
  const std::vector<Vec3>& normals_;
  const SegmenterConfig& config_;
  std::vector<Center> centers_;
  std::vector<int> labels_;
  std::vector<double> cost_;
};

}  // namespace

SupervoxelPartition segment(const PointCloud& cloud, const NormalField& normals,
                            const SegmenterConfig& config) {
  config.validate();
  if (normals.normals.size() != cloud.size()) {
    throw InputError("normals are not aligned with the cloud");
  }
  const double ratio = static_cast<double>(cloud.size()) / config.desired_point_count;
  const auto region_count =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio)));
  if (region_count == 1) return SupervoxelPartition::single_region(cloud.size());
  Segmenter segmenter(cloud, normals, config);
  return SupervoxelPartition(segmenter.run(region_count));
}

}  // namespace hcrf
