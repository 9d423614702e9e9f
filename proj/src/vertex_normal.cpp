#include "cadinspect/mesh.hpp"

#include <Eigen/LU>

#include <cmath>

namespace cadinspect {
namespace {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

Vec4 first_order_residual(const Eigen::Matrix3d& scatter, const Vec3& n, double lambda) {
  Vec4 f;
  f.head<3>() = 2.0 * (scatter * n + lambda * n);
  f[3] = n.squaredNorm() - 1.0;
  return f;
}

// Orthonormal basis of the plane orthogonal to n.
Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 t1 = n.cross(helper).normalized();
  const Vec3 t2 = n.cross(t1).normalized();
  Eigen::Matrix<double, 3, 2> z;
  z << t1, t2;
  return z;
}

struct Curvature {
  double min_eigenvalue;
  Eigen::Vector2d direction;
};

// Smallest eigenpair of a symmetric 2x2 matrix in closed form.
Curvature smallest_eigenpair(const Eigen::Matrix2d& m) {
  const double a = m(0, 0), b = m(0, 1), d = m(1, 1);
  const double mean = 0.5 * (a + d);
  const double radius = std::hypot(0.5 * (a - d), b);
  const double lo = mean - radius;
  Eigen::Vector2d v;
  if (std::abs(b) > 1e-300) {
    v = Eigen::Vector2d(lo - d, b);
  } else {
    v = a <= d ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
  }
  return {lo, v.normalized()};
}

}  // namespace

Eigen::Matrix3d neighbour_scatter(const TriMesh& mesh, std::size_t vertex_index) {
  Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
  const Vec3& vi = mesh.vertex(vertex_index);
  for (auto j : mesh.neighbors(vertex_index)) {
    const Vec3 dij = vi - mesh.vertex(j);
    d.noalias() += dij * dij.transpose();
  }
  return d;
}

VertexNormal vertex_normal_newton(const Eigen::Matrix3d& scatter, const Vec3& initial_guess,
                                  const NewtonOptions& options) {
  if (!(initial_guess.norm() > 0.0) || !initial_guess.allFinite()) {
    throw GeometryError("vertex normal seed must be a finite nonzero vector");
  }
  const double scale = std::max(scatter.norm(), 1e-300);
  VertexNormal out;
  Vec3 seed = initial_guess.normalized();
  bool any_nonsingular = false;

  for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
    out.restarts = attempt;
    Vec3 n = seed;
    double lambda = -n.dot(scatter * n);
    bool singular = false;
    bool converged = false;
    int it = 0;
    for (; it <= options.max_iter; ++it) {
      const Vec4 f = first_order_residual(scatter, n, lambda);
      if (f.norm() <= options.tol) {
        converged = true;
        break;
      }
      if (it == options.max_iter) break;
      Mat4 jac = Mat4::Zero();
      jac.topLeftCorner<3, 3>() = 2.0 * (scatter + lambda * Eigen::Matrix3d::Identity());
      jac.topRightCorner<3, 1>() = 2.0 * n;
      jac.bottomLeftCorner<1, 3>() = 2.0 * n.transpose();
      Eigen::FullPivLU<Mat4> lu(jac);
      lu.setThreshold(1e-12);
      if (!lu.isInvertible()) {
        singular = true;
        break;
      }
      const Vec4 step = lu.solve(-f);
      n += step.head<3>();
      lambda += step[3];
    }
    out.iterations += it;
    if (singular) {
      // Perturb deterministically and try again.
      seed = (seed + 0.35 * Vec3::Unit(attempt % 3)).normalized();
      continue;
    }
    any_nonsingular = true;

    out.direction = n.normalized();
    out.lagrange_multiplier = lambda;
    out.converged = converged;
    out.residual_norm = first_order_residual(scatter, n, lambda).norm();
    out.cost = out.direction.dot(scatter * out.direction);

    // Second-order check on the constraint tangent plane: a constrained
    // minimum needs Z^T (D + lambda I) Z to be positive semidefinite.
    const auto z = tangent_basis(out.direction);
    const Eigen::Matrix2d projected =
        z.transpose() * (scatter + lambda * Eigen::Matrix3d::Identity()) * z;
    const Curvature curv = smallest_eigenpair(projected);
    out.is_minimum = converged && curv.min_eigenvalue >= -1e-10 * scale;
    if (out.is_minimum || !converged) break;
    // Converged to a saddle or maximum: restart along the negative-curvature
    // tangent direction.
    seed = (z * curv.direction).normalized();
  }
  if (!any_nonsingular) {
    throw NumericError("vertex normal Newton: singular Jacobian for every seed");
  }
  if (out.direction.dot(initial_guess) < 0.0) out.direction = -out.direction;
  return out;
}

VertexNormal vertex_normal_newton(const TriMesh& mesh, std::size_t vertex_index,
                                  const Vec3& initial_guess, const NewtonOptions& options) {
  if (vertex_index >= mesh.num_vertices()) throw GeometryError("vertex index out of range");
  if (mesh.neighbors(vertex_index).size() < 2) {
    throw GeometryError("vertex " + std::to_string(vertex_index) +
                        " has fewer than two neighbours");
  }
  return vertex_normal_newton(neighbour_scatter(mesh, vertex_index), initial_guess, options);
}

VertexNormal vertex_normal_newton(const TriMesh& mesh, std::size_t vertex_index,
                                  const NewtonOptions& options) {
  if (vertex_index >= mesh.num_vertices()) throw GeometryError("vertex index out of range");
  Vec3 seed = Vec3::Zero();
  for (auto f : mesh.incident_faces(vertex_index)) {
    if (!mesh.is_degenerate(f)) seed += mesh.face_normal(f);
  }
  if (!(seed.norm() > 1e-12)) seed = Vec3::UnitZ();
  return vertex_normal_newton(mesh, vertex_index, seed, options);
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh, const NewtonOptions& options) {
  std::vector<Vec3> normals(mesh.num_vertices());
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    normals[i] = vertex_normal_newton(mesh, i, options).direction;
  }
  return normals;
}

}  // namespace cadinspect
