#include "cadinspect/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cadinspect {

std::optional<TriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& direction,
                                                  const Vec3& a, const Vec3& b, const Vec3& c,
                                                  double t_min) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  // Parallel (or degenerate) relative to the edge scale.
  if (std::abs(det) <= 1e-14 * e1.norm() * e2.norm() * direction.norm()) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = origin - a;
  const double u = s.dot(p) * inv_det;
  if (u < -kHitTieEps || u > 1.0 + kHitTieEps) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv_det;
  if (v < -kHitTieEps || u + v > 1.0 + kHitTieEps) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (t < t_min) return std::nullopt;
  return TriangleHit{t, u, v};
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

std::optional<double> intersect_ray_box(const Vec3& origin, const Vec3& inv_direction,
                                        const Eigen::AlignedBox3d& box, double t_min,
                                        double t_max) {
  double lo = t_min;
  double hi = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    double t0 = (box.min()[axis] - origin[axis]) * inv_direction[axis];
    double t1 = (box.max()[axis] - origin[axis]) * inv_direction[axis];
    if (std::isnan(t0) || std::isnan(t1)) {
      // Direction component is zero and the origin lies on a slab plane.
      if (origin[axis] < box.min()[axis] || origin[axis] > box.max()[axis]) return std::nullopt;
      continue;
    }
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return std::nullopt;
  }
  return lo;
}

double squared_distance_to_box(const Vec3& p, const Eigen::AlignedBox3d& box) {
  double d2 = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (p[axis] < box.min()[axis]) {
      const double d = box.min()[axis] - p[axis];
      d2 += d * d;
    } else if (p[axis] > box.max()[axis]) {
      const double d = p[axis] - box.max()[axis];
      d2 += d * d;
    }
  }
  return d2;
}

Vec3 barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 v0 = b - a;
  const Vec3 v1 = c - a;
  const Vec3 v2 = p - a;
  const double d00 = v0.dot(v0);
  const double d01 = v0.dot(v1);
  const double d11 = v1.dot(v1);
  const double d20 = v2.dot(v0);
  const double d21 = v2.dot(v1);
  const double denom = d00 * d11 - d01 * d01;
  const double v = (d11 * d20 - d01 * d21) / denom;
  const double w = (d00 * d21 - d01 * d20) / denom;
  return {1.0 - v - w, v, w};
}

}  // namespace cadinspect
