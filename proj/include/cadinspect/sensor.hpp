#pragma once

#include "cadinspect/mesh.hpp"
#include "cadinspect/raycast.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

namespace cadinspect {

// Camera-to-world transform. The camera z axis is the optical axis, x points
// right and y down in the image.
struct CameraPose {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Vec3 to_world(const Vec3& p_camera) const { return orientation * p_camera + position; }
  Vec3 to_camera(const Vec3& p_world) const {
    return orientation.conjugate() * (p_world - position);
  }
};

// Camera at `position` looking at `target`. The image y axis is kept as
// close as possible to -up.
CameraPose look_at(const Vec3& position, const Vec3& target, const Vec3& up = Vec3::UnitY());

// Pinhole stereo camera with range-dependent isotropic noise
// sigma(rho) = a * exp(b * rho). Defaults describe a 1280x720 stereo depth
// camera with a = 0.0184 m and b = 0.2106 1/m.
struct CameraModel {
  double hfov_rad = 65.0 * 3.14159265358979323846 / 180.0;
  double vfov_rad = 40.0 * 3.14159265358979323846 / 180.0;
  int width_px = 1280;
  int height_px = 720;
  double a = 0.0184;
  double b = 0.2106;
  double min_range_m = 0.1;
  double max_range_m = 10.0;
  int stride = 1;  // sample every stride-th pixel in both directions

  void validate() const;
  // Unit ray through the centre of pixel (u, v), camera frame.
  Vec3 pixel_ray(int u, int v) const;
};

struct PointCloud {
  std::vector<Vec3> points;  // camera frame, metres
  CameraPose pose;
  std::uint64_t seq = 0;
  CameraModel model;
  std::string config_hash;  // empty when produced outside a configured run
};

// Standard deviation (metres) of each coordinate at range rho; the point
// covariance is sigma^2 I. Throws Error for negative range.
double noise_sigma(const CameraModel& model, double range_m);

// One ray per sampled pixel centre; rays hitting the truth mesh within the
// range limits yield the hit point plus N(0, sigma^2 I) noise in the camera
// frame. Noise for pixel (u, v) is drawn from a stream keyed on
// (seed, v * width + u) so the result does not depend on evaluation order.
PointCloud simulate_cloud(const TriMesh& truth_mesh, const Bvh& bvh, const CameraPose& pose,
                          const CameraModel& model, std::uint64_t rng_seed);

// ASCII PLY with double x y z, plus a JSON sidecar (same stem, .json) that
// carries pose, seq, camera model and config hash.
void write_cloud(const PointCloud& cloud, const std::string& ply_path);
PointCloud read_cloud(const std::string& ply_path);
std::string cloud_sidecar_path(const std::string& ply_path);

}  // namespace cadinspect
