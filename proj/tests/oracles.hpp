#pragma once

// Independent reference implementations used to check the library. None of
// them call into the code under test beyond plain data accessors.

#include "cadinspect/estimator.hpp"
#include "cadinspect/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>

namespace oracle {

using cadinspect::Vec3;

struct Hit {
  std::uint32_t face = 0;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
};

// Ray/plane intersection followed by an inside test on the 2x2 barycentric
// system. Deliberately not Moller-Trumbore.
inline std::optional<double> ray_triangle(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b,
                                          const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-300 || n.norm() == 0.0) return std::nullopt;
  const double t = n.dot(a - o) / denom;
  if (t < 0.0) return std::nullopt;
  const Vec3 p = o + t * d;
  Eigen::Matrix2d m;
  const Vec3 e1 = b - a, e2 = c - a, w = p - a;
  m << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
  const Eigen::Vector2d rhs(w.dot(e1), w.dot(e2));
  const Eigen::Vector2d uv = m.fullPivLu().solve(rhs);
  const double tol = 1e-9;
  if (uv[0] < -tol || uv[1] < -tol || uv[0] + uv[1] > 1.0 + tol) return std::nullopt;
  return t;
}

inline std::optional<Hit> brute_ray(const cadinspect::TriMesh& mesh, const Vec3& o, const Vec3& d) {
  std::optional<Hit> best;
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
    const auto c = mesh.face_corners(j);
    const auto t = ray_triangle(o, d, c[0], c[1], c[2]);
    if (t && (!best || *t < best->t)) best = Hit{static_cast<std::uint32_t>(j), *t, o + *t * d};
  }
  return best;
}

// Cyclic Jacobi rotations on a symmetric 3x3 matrix; returns the unit
// eigenvector of the smallest eigenvalue.
inline Vec3 jacobi_smallest_eigenvector(Eigen::Matrix3d a) {
  Eigen::Matrix3d v = Eigen::Matrix3d::Identity();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-60) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
        r(p, p) = c;
        r(q, q) = c;
        r(p, q) = s;
        r(q, p) = -s;
        a = r.transpose() * a * r;
        v = v * r;
      }
    }
  }
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (a(i, i) < a(k, k)) k = i;
  return v.col(k).normalized();
}

// Dense stacked weighted least squares with an explicit 3-row block per
// measurement: (P0^-1 + H^T R^-1 H) x = H^T R^-1 Delta (zero prior mean).
struct DenseSolution {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;
};

inline DenseSolution dense_wls(std::span<const cadinspect::MeasurementBatch> batches, std::size_t n_f,
                               double sigma0) {
  const auto n = static_cast<Eigen::Index>(n_f);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) / (sigma0 * sigma0);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (const auto& b : batches) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      // H block: 3x n_f with column face_of[i] = normal.
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, n);
      h.col(b.face_of[i]) = b.normals[i];
      const double w = 1.0 / (b.sigma_of[i] * b.sigma_of[i]);
      a += w * h.transpose() * h;
      rhs += w * h.transpose() * b.residuals[i];
    }
  }
  DenseSolution s;
  s.P = a.inverse();
  s.x = s.P * rhs;
  return s;
}

// Random batch: faces in [0, n_f), random unit normals, residual = x_true n + noise.
inline cadinspect::MeasurementBatch random_batch(std::mt19937_64& rng, std::size_t n_f, std::size_t n_points,
                                                 const Eigen::VectorXd& x_true) {
  std::uniform_int_distribution<std::uint32_t> face(0, static_cast<std::uint32_t>(n_f - 1));
  std::uniform_real_distribution<double> sig(0.001, 0.03);
  std::normal_distribution<double> g(0.0, 1.0);
  cadinspect::MeasurementBatch b;
  for (std::size_t i = 0; i < n_points; ++i) {
    const auto j = face(rng);
    const Vec3 n = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double s = sig(rng);
    const Vec3 eps(g(rng) * s, g(rng) * s, g(rng) * s);
    b.push_back(x_true[j] * n + eps, j, s, n);
  }
  return b;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace oracle
