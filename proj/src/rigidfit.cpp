#include "hcrf/rigidfit.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include "hcrf/errors.hpp"

namespace hcrf {

Correspondences::Correspondences(std::span<const Vec3> source,
                                 std::span<const Vec3> destination)
    : source_(source), destination_(destination) {
  if (source_.size() != destination_.size()) {
    throw InputError("correspondence sets differ in length");
  }
  if (source_.empty()) throw InputError("empty correspondence set");
}

std::pair<Vec3, Vec3> centroids(const Correspondences& c) {
  Vec3 ps = Vec3::Zero();
  Vec3 ds = Vec3::Zero();
  for (std::size_t j = 0; j < c.size(); ++j) {
    ps += c.source()[j];
    ds += c.destination()[j];
  }
  const double inv = 1.0 / static_cast<double>(c.size());
  return {ps * inv, ds * inv};
}

Mat3 cross_covariance(const Correspondences& c) {
  const auto [pbar, dbar] = centroids(c);
  Mat3 h = Mat3::Zero();
  for (std::size_t j = 0; j < c.size(); ++j) {
    h.noalias() += (c.source()[j] - pbar) * (c.destination()[j] - dbar).transpose();
  }
  return h;
}

RigidFit kabsch_fit(const Correspondences& c) {
  const auto [pbar, dbar] = centroids(c);
  const Mat3 h = cross_covariance(c);

  RigidFit fit;
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  // A unique rotation needs at least two non-vanishing singular values.
  if (c.size() < 3 || s[0] <= 1e-300 || s[1] <= 1e-9 * s[0]) {
    fit.transform.rotation = Mat3::Identity();
    fit.transform.translation = dbar - pbar;
    fit.degenerate = true;
    return fit;
  }

  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 correction = Mat3::Identity();
  correction(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  fit.transform.rotation = v * correction * u.transpose();
  fit.transform.translation = dbar - fit.transform.rotation * pbar;
  return fit;
}

double rigid_mse(const RigidTransform& transform, const Correspondences& c) {
  double sum = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    sum += (transform.apply(c.source()[j]) - c.destination()[j]).squaredNorm();
  }
  return sum / static_cast<double>(c.size());
}

}  // namespace hcrf
