#pragma once

#include "cadinspect/raycast.hpp"
#include "cadinspect/sensor.hpp"

#include <Eigen/Geometry>

namespace cadinspect {

// p -> R p + t.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  // (this * other)(p) = this(other(p)).
  RigidTransform operator*(const RigidTransform& other) const;
  RigidTransform inverse() const;
  double rotation_angle() const;
};

struct IcpOptions {
  int max_iter = 50;
  double tol = 1e-7;            // stop when |dt| + |dtheta| falls below
  double trim_fraction = 0.10;  // worst residuals dropped per iteration
  int divergence_window = 5;
};

struct IcpResult {
  RigidTransform transform;  // world-frame correction applied after the pose
  double rms_residual = 0.0;
  double initial_rms_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Point-to-point ICP of pose-transformed cloud points against the mesh
// surface, using closest-point correspondences and the SVD solution of the
// orthogonal Procrustes problem. Throws Error with fewer than 3
// correspondences and NumericError when the trimmed residual rises for
// divergence_window consecutive iterations.
IcpResult icp_align(const PointCloud& cloud, const TriMesh& mesh, const Bvh& bvh,
                    const RigidTransform& initial = RigidTransform::identity(),
                    const IcpOptions& options = {});

// RMS point-to-surface distance of the cloud under pose then correction.
double rms_point_to_mesh(const PointCloud& cloud, const TriMesh& mesh, const Bvh& bvh,
                         const RigidTransform& correction);

}  // namespace cadinspect
