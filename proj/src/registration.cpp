#include "cadinspect/registration.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cadinspect {

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t) {
  RigidTransform out;
  out.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized()));
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  RigidTransform out;
  out.rotation = (rotation * other.rotation).normalized();
  out.translation = rotation * other.translation + translation;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.conjugate();
  out.translation = -(out.rotation * translation);
  return out;
}

double RigidTransform::rotation_angle() const {
  return Eigen::AngleAxisd(rotation).angle();
}

namespace {

struct Pairing {
  std::vector<Vec3> source;
  std::vector<Vec3> target;
  std::vector<double> distance;
  double rms = 0.0;
};

Pairing pair_points(const std::vector<Vec3>& world, const TriMesh& mesh, const Bvh& bvh,
                    const RigidTransform& correction) {
  Pairing out;
  out.source.reserve(world.size());
  out.target.reserve(world.size());
  double sum = 0.0;
  for (const auto& w : world) {
    const Vec3 p = correction.apply(w);
    const auto hit = closest_point(bvh, mesh, p);
    if (!hit) continue;
    out.source.push_back(p);
    out.target.push_back(hit->point);
    out.distance.push_back(hit->distance);
    sum += hit->distance * hit->distance;
  }
  if (!out.source.empty()) out.rms = std::sqrt(sum / static_cast<double>(out.source.size()));
  return out;
}

// Best rigid map source -> target in the least-squares sense.
RigidTransform procrustes(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                          const std::vector<std::size_t>& keep) {
  Vec3 ps = Vec3::Zero(), pt = Vec3::Zero();
  for (auto i : keep) {
    ps += source[i];
    pt += target[i];
  }
  ps /= static_cast<double>(keep.size());
  pt /= static_cast<double>(keep.size());
  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (auto i : keep) cross.noalias() += (source[i] - ps) * (target[i] - pt).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d rot = v * fix * u.transpose();
  RigidTransform out;
  out.rotation = Eigen::Quaterniond(rot).normalized();
  out.translation = pt - rot * ps;
  return out;
}

std::vector<Vec3> world_points(const PointCloud& cloud) {
  std::vector<Vec3> world;
  world.reserve(cloud.points.size());
  for (const auto& p : cloud.points) world.push_back(cloud.pose.to_world(p));
  return world;
}

}  // namespace

double rms_point_to_mesh(const PointCloud& cloud, const TriMesh& mesh, const Bvh& bvh,
                         const RigidTransform& correction) {
  return pair_points(world_points(cloud), mesh, bvh, correction).rms;
}

IcpResult icp_align(const PointCloud& cloud, const TriMesh& mesh, const Bvh& bvh,
                    const RigidTransform& initial, const IcpOptions& options) {
  const auto world = world_points(cloud);
  IcpResult result;
  RigidTransform current = initial;
  RigidTransform best = initial;
  double best_rms = 0.0;
  double last_trimmed = 0.0;
  int rising = 0;

  for (int it = 0;; ++it) {
    const Pairing pairs = pair_points(world, mesh, bvh, current);
    if (pairs.source.size() < 3) {
      throw Error("ICP needs at least 3 correspondences, found " +
                  std::to_string(pairs.source.size()));
    }
    std::vector<std::size_t> order(pairs.source.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto keep_count = std::max<std::size_t>(
        3, static_cast<std::size_t>(std::ceil((1.0 - options.trim_fraction) * order.size())));
    if (keep_count < order.size()) {
      std::nth_element(order.begin(), order.begin() + keep_count, order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return pairs.distance[a] < pairs.distance[b] ||
                                (pairs.distance[a] == pairs.distance[b] && a < b);
                       });
      order.resize(keep_count);
    }
    // The trimmed residual is what each step minimises, so it cannot rise
    // beyond roundoff unless something is wrong; the full residual can.
    double trimmed = 0.0;
    for (auto i : order) trimmed += pairs.distance[i] * pairs.distance[i];
    trimmed = std::sqrt(trimmed / static_cast<double>(order.size()));

    if (it == 0) {
      result.initial_rms_residual = pairs.rms;
      best_rms = pairs.rms;
    } else {
      if (pairs.rms <= best_rms) {
        best_rms = pairs.rms;
        best = current;
      }
      rising = trimmed > last_trimmed * (1.0 + 1e-12) ? rising + 1 : 0;
      if (rising >= options.divergence_window) {
        throw NumericError("ICP diverged: residual rose for " + std::to_string(rising) +
                           " consecutive iterations");
      }
    }
    last_trimmed = trimmed;
    if (it == options.max_iter || result.converged) break;

    const RigidTransform step = procrustes(pairs.source, pairs.target, order);
    current = step * current;
    result.iterations = it + 1;
    if (step.translation.norm() + step.rotation_angle() < options.tol) result.converged = true;
  }
  // Never hand back something worse than where we started.
  result.transform = best;
  result.rms_residual = best_rms;
  return result;
}

}  // namespace cadinspect
