#pragma once

// Independent test oracles. Nothing here calls into the code paths it is
// used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "hcrf/geometry.hpp"

namespace oracle {

using hcrf::Mat3;
using hcrf::Vec3;

inline std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Mat3 axis_angle(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

// Exhaustive scan: every distance, sorted lexicographically by (distance, index).
inline std::vector<std::vector<std::size_t>> brute_knn(const std::vector<Vec3>& target,
                                                       const std::vector<Vec3>& queries,
                                                       std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& q : queries) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double dx = target[j].x() - q.x();
      const double dy = target[j].y() - q.y();
      const double dz = target[j].z() - q.z();
      all.emplace_back(dx * dx + dy * dy + dz * dz, j);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> ids;
    for (std::size_t s = 0; s < std::min(k, all.size()); ++s) ids.push_back(all[s].second);
    out.push_back(ids);
  }
  return out;
}

// Cyclic Jacobi eigen-decomposition of a symmetric 3×3 matrix. Returns the
// eigenvector of the smallest eigenvalue.
inline Vec3 smallest_eigenvector(Mat3 a) {
  Mat3 v = Mat3::Identity();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Mat3 j = Mat3::Identity();
        j(p, p) = c;
        j(q, q) = c;
        j(p, q) = s;
        j(q, p) = -s;
        a = j.transpose() * a * j;
        v = v * j;
      }
    }
  }
  int best = 0;
  for (int i = 1; i < 3; ++i)
    if (a(i, i) < a(best, best)) best = i;
  return v.col(best).normalized();
}

struct Fit {
  Mat3 rotation;
  Vec3 translation;
};

// Horn's closed-form absolute orientation via unit quaternions: the optimal
// rotation is the top eigenvector of a symmetric 4×4 matrix.
inline Fit horn_fit(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  Vec3 ps = Vec3::Zero();
  Vec3 ds = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ps += src[i];
    ds += dst[i];
  }
  ps /= static_cast<double>(src.size());
  ds /= static_cast<double>(src.size());
  Mat3 m = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) m += (src[i] - ps) * (dst[i] - ds).transpose();
  const double sxx = m(0, 0), sxy = m(0, 1), sxz = m(0, 2);
  const double syx = m(1, 0), syy = m(1, 1), syz = m(1, 2);
  const double szx = m(2, 0), szy = m(2, 1), szz = m(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);
  const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  Fit f;
  f.rotation = quat.normalized().toRotationMatrix();
  f.translation = ds - f.rotation * ps;
  return f;
}

inline double fit_mse(const Mat3& r, const Vec3& t, const std::vector<Vec3>& src,
                      const std::vector<Vec3>& dst) {
  double s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) s += (r * src[i] + t - dst[i]).squaredNorm();
  return s / static_cast<double>(src.size());
}

// Lowest MSE over a dense axis-angle grid (cube [-π, π]³, `steps` per axis),
// each rotation paired with its optimal translation.
inline double grid_search_mse(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                              int steps) {
  Vec3 ps = Vec3::Zero();
  Vec3 ds = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ps += src[i];
    ds += dst[i];
  }
  ps /= static_cast<double>(src.size());
  ds /= static_cast<double>(src.size());
  double best = 1e300;
  const double pi = std::numbers::pi;
  for (int a = 0; a < steps; ++a)
    for (int b = 0; b < steps; ++b)
      for (int c = 0; c < steps; ++c) {
        const Vec3 v(-pi + 2 * pi * a / (steps - 1), -pi + 2 * pi * b / (steps - 1),
                     -pi + 2 * pi * c / (steps - 1));
        if (v.norm() > pi) continue;
        const Mat3 r = axis_angle(v);
        best = std::min(best, fit_mse(r, ds - r * ps, src, dst));
      }
  return best;
}

// Golden-section minimization of a unimodal function on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             double tol) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct Metrics {
  double epe3d, acc3ds, acc3dr, outliers3d;
};

// Straight-line metric evaluator: plain loops, no shared helpers.
inline Metrics metrics(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
  double sum = 0.0;
  int s = 0, r = 0, o = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    double e2 = 0.0, g2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      e2 += (pred[i][c] - gt[i][c]) * (pred[i][c] - gt[i][c]);
      g2 += gt[i][c] * gt[i][c];
    }
    const double e = std::sqrt(e2);
    const double g = std::max(std::sqrt(g2), 1e-12);
    sum += e;
    if (e < 0.05 || e / g < 0.05) ++s;
    if (e < 0.1 || e / g < 0.1) ++r;
    if (e > 0.3 || e / g > 0.1) ++o;
  }
  const double n = static_cast<double>(gt.size());
  return {sum / n, 100.0 * s / n, 100.0 * r / n, 100.0 * o / n};
}

}  // namespace oracle
