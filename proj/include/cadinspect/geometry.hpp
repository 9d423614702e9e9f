#pragma once

#include "cadinspect/common.hpp"

#include <Eigen/Geometry>

#include <optional>

namespace cadinspect {

// Absolute slack used for inclusive barycentric tests and for treating two
// hit distances as equal (then the lower face index wins).
inline constexpr double kHitTieEps = 1e-12;

struct TriangleHit {
  double t = 0.0;
  double u = 0.0;  // barycentric weight of the second corner
  double v = 0.0;  // barycentric weight of the third corner
};

// Moller-Trumbore with inclusive edges. Returns hits with t >= t_min only;
// rays parallel to the triangle plane never hit.
std::optional<TriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& direction,
                                                  const Vec3& a, const Vec3& b, const Vec3& c,
                                                  double t_min = 0.0);

// Closest point on the solid triangle abc to p (Ericson, Real-Time Collision
// Detection, 5.1.5).
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

// Slab test. Returns the entry distance (clamped at t_min) or nullopt.
std::optional<double> intersect_ray_box(const Vec3& origin, const Vec3& inv_direction,
                                        const Eigen::AlignedBox3d& box, double t_min,
                                        double t_max);

double squared_distance_to_box(const Vec3& p, const Eigen::AlignedBox3d& box);

// Barycentric coordinates of p (assumed in the plane) with respect to abc.
Vec3 barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace cadinspect
