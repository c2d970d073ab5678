#pragma once

#include <span>
#include <utility>

#include "hcrf/geometry.hpp"

namespace hcrf {

// Paired source/destination points (P_V and D_V). Non-owning.
class Correspondences {
 public:
  Correspondences(std::span<const Vec3> source, std::span<const Vec3> destination);

  std::size_t size() const { return source_.size(); }
  std::span<const Vec3> source() const { return source_; }
  std::span<const Vec3> destination() const { return destination_; }

 private:
  std::span<const Vec3> source_;
  std::span<const Vec3> destination_;
};

struct RigidFit {
  RigidTransform transform;
  // Set when H is rank deficient (fewer than 3 points, collinear or
  // coincident); the transform is then translation-only.
  bool degenerate = false;
};

std::pair<Vec3, Vec3> centroids(const Correspondences& c);

// H = Σ (p_j − p̄)(d_j − d̄)ᵀ
Mat3 cross_covariance(const Correspondences& c);

// Least-squares rigid motion source → destination via SVD of H with the
// determinant sign correction, so the rotation is always proper.
RigidFit kabsch_fit(const Correspondences& c);

// Displacement R·p + t − p of a point under a rigid motion.
inline Vec3 rigid_flow_at(const RigidTransform& transform, const Vec3& p) {
  return transform.rotation * p + transform.translation - p;
}

// Mean squared residual of a transform on a correspondence set.
double rigid_mse(const RigidTransform& transform, const Correspondences& c);

}  // namespace hcrf
