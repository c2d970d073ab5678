#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace hcrf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

bool is_finite(const Vec3& v);

// Positions of one frame plus optional per-point feature vectors of uniform
// dimension. Construction validates the invariants; instances are immutable.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Vec3> points);
  PointCloud(std::vector<Vec3> points, std::vector<Eigen::VectorXd> features);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }

  bool has_features() const { return !features_.empty(); }
  const std::vector<Eigen::VectorXd>& features() const { return features_; }
  Eigen::Index feature_dim() const {
    return features_.empty() ? 0 : features_.front().size();
  }

  // Copy with the features replaced.
  PointCloud with_features(std::vector<Eigen::VectorXd> features) const;

 private:
  std::vector<Vec3> points_;
  std::vector<Eigen::VectorXd> features_;
};

// Per-point displacement vectors aligned with a source cloud.
class FlowField {
 public:
  FlowField() = default;
  explicit FlowField(std::vector<Vec3> vectors);

  static FlowField zeros(std::size_t n);

  std::size_t size() const { return vectors_.size(); }
  const std::vector<Vec3>& vectors() const { return vectors_; }
  const Vec3& operator[](std::size_t i) const { return vectors_[i]; }

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  std::vector<Vec3> vectors_;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& inner) const;  // this ∘ inner
  bool is_proper(double tol = 1e-9) const;
};

// For every query, indices into the target cloud ordered by increasing
// distance (ties by lower index).
class NeighborGraph {
 public:
  NeighborGraph() = default;
  NeighborGraph(std::vector<std::vector<std::size_t>> lists, std::size_t target_size);

  std::size_t size() const { return lists_.size(); }
  std::size_t target_size() const { return target_size_; }
  std::span<const std::size_t> neighbors(std::size_t query) const { return lists_[query]; }
  const std::vector<std::vector<std::size_t>>& lists() const { return lists_; }

  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;

 private:
  std::vector<std::vector<std::size_t>> lists_;
  std::size_t target_size_ = 0;
};

struct NormalField {
  std::vector<Vec3> normals;
  std::vector<bool> valid;  // false where the neighborhood was degenerate
};

NeighborGraph knn_search(std::span<const Vec3> target, std::span<const Vec3> queries, int k);
NeighborGraph knn_search(const PointCloud& target, const PointCloud& queries, int k);

// PCA normals over the k-neighborhood; smallest-eigenvalue eigenvector with the
// largest-magnitude component made positive. Coincident neighborhoods yield
// (0,0,1) and valid = false.
NormalField estimate_normals(const PointCloud& cloud, int k = 16);

PointCloud warp(const PointCloud& cloud, const FlowField& flow);

}  // namespace hcrf
