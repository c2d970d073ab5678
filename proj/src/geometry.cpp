#include "hcrf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "hcrf/errors.hpp"

namespace hcrf {

bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

PointCloud::PointCloud(std::vector<Vec3> points) : PointCloud(std::move(points), {}) {}

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<Eigen::VectorXd> features)
    : points_(std::move(points)), features_(std::move(features)) {
  if (points_.empty()) throw InputError("point cloud must contain at least one point");
  for (const auto& p : points_) {
    if (!is_finite(p)) throw InputError("point cloud contains a non-finite coordinate");
  }
  if (!features_.empty()) {
    if (features_.size() != points_.size()) {
      throw InputError("feature count does not match point count");
    }
    const auto dim = features_.front().size();
    for (const auto& f : features_) {
      if (f.size() != dim) throw InputError("features must share one dimension");
      if (!f.allFinite()) throw InputError("point cloud contains a non-finite feature");
    }
  }
}

PointCloud PointCloud::with_features(std::vector<Eigen::VectorXd> features) const {
  return PointCloud(points_, std::move(features));
}

FlowField::FlowField(std::vector<Vec3> vectors) : vectors_(std::move(vectors)) {
  for (const auto& v : vectors_) {
    if (!is_finite(v)) throw InputError("flow field contains a non-finite vector");
  }
}

FlowField FlowField::zeros(std::size_t n) {
  return FlowField(std::vector<Vec3>(n, Vec3::Zero()));
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  out.rotation = rotation * inner.rotation;
  out.translation = rotation * inner.translation + translation;
  return out;
}

bool RigidTransform::is_proper(double tol) const {
  const Mat3 gram = rotation.transpose() * rotation;
  return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

NeighborGraph::NeighborGraph(std::vector<std::vector<std::size_t>> lists,
                             std::size_t target_size)
    : lists_(std::move(lists)), target_size_(target_size) {
  for (const auto& list : lists_) {
    for (auto j : list) {
      if (j >= target_size_) throw InputError("neighbor index out of range");
    }
  }
}

namespace {

using Candidate = std::pair<double, std::size_t>;  // (squared distance, index)

std::vector<std::size_t> nearest(std::span<const Vec3> target, const Vec3& q,
                                 std::size_t k) {
  // Max-heap on (distance, index) keeps the k lexicographically smallest.
  std::priority_queue<Candidate> heap;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const Candidate c{(target[j] - q).squaredNorm(), j};
    if (heap.size() < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  }
  std::vector<std::size_t> out(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = heap.top().second;
    heap.pop();
  }
  return out;
}

}  // namespace

NeighborGraph knn_search(std::span<const Vec3> target, std::span<const Vec3> queries, int k) {
  if (target.empty()) throw InputError("empty target");
  if (k < 1) throw ConfigError("k must be at least 1");
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), target.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
  std::vector<std::vector<std::size_t>> lists(queries.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    lists[i] = nearest(target, queries[i], kk);
  }
  return NeighborGraph(std::move(lists), target.size());
}

NeighborGraph knn_search(const PointCloud& target, const PointCloud& queries, int k) {
  return knn_search(std::span<const Vec3>(target.points()), std::span<const Vec3>(queries.points()), k);
}

NormalField estimate_normals(const PointCloud& cloud, int k) {
  if (cloud.size() < 3) throw InputError("normal estimation needs at least 3 points");
  if (k < 3) throw ConfigError("normal estimation needs k >= 3");
  const auto graph = knn_search(cloud, cloud, k);
  const auto n = static_cast<std::ptrdiff_t>(cloud.size());

  NormalField field;
  field.normals.assign(cloud.size(), Vec3::UnitZ());
  std::vector<char> valid(cloud.size(), 0);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(i);
    Vec3 mean = Vec3::Zero();
    for (auto j : nbrs) mean += cloud[j];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    double scale = 0.0;
    for (auto j : nbrs) {
      const Vec3 d = cloud[j] - mean;
      cov += d * d.transpose();
      scale = std::max(scale, cloud[j].squaredNorm());
    }
    // All neighbors coincident (up to rounding of their coordinates).
    if (cov.trace() <= 1e-24 * (1.0 + scale)) continue;

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    Eigen::Index dominant = 0;
    normal.cwiseAbs().maxCoeff(&dominant);
    if (normal[dominant] < 0) normal = -normal;
    field.normals[i] = normal;
    valid[i] = 1;
  }
  field.valid.assign(valid.begin(), valid.end());
  return field;
}

PointCloud warp(const PointCloud& cloud, const FlowField& flow) {
  if (flow.size() != cloud.size()) throw InputError("misaligned flow");
  std::vector<Vec3> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = cloud[i] + flow[i];
  if (cloud.has_features()) return PointCloud(std::move(out), cloud.features());
  return PointCloud(std::move(out));
}

}  // namespace hcrf
