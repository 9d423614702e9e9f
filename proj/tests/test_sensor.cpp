#include "cadinspect/sensor.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace cadinspect;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "cadinspect_sensor_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(NoiseSigma, DefaultCoefficients) {
  const CameraModel m;
  EXPECT_DOUBLE_EQ(noise_sigma(m, 0.0), 0.0184);
  EXPECT_NEAR(noise_sigma(m, 0.5), 0.0184 * std::exp(0.2106 * 0.5), 1e-15);
  EXPECT_NEAR(noise_sigma(m, 0.5), 0.02044, 1e-5);
  double prev = noise_sigma(m, 0.0);
  for (double rho = 0.1; rho < 5.0; rho += 0.1) {
    const double s = noise_sigma(m, rho);
    EXPECT_GT(s, prev);
    prev = s;
  }
  EXPECT_THROW(noise_sigma(m, -0.1), Error);
}

TEST(CameraModel, Validation) {
  CameraModel m;
  EXPECT_NO_THROW(m.validate());
  m.a = -1.0;
  EXPECT_THROW(m.validate(), Error);
  m = CameraModel{};
  m.stride = 0;
  EXPECT_THROW(m.validate(), Error);
  m = CameraModel{};
  m.hfov_rad = 0.0;
  EXPECT_THROW(m.validate(), Error);
}

TEST(CameraModel, PixelRays) {
  CameraModel m;
  m.width_px = 3;
  m.height_px = 3;
  EXPECT_LT((m.pixel_ray(1, 1) - Vec3::UnitZ()).norm(), 1e-15);
  const Vec3 corner = m.pixel_ray(0, 0);
  // Pixel centre (0.5 px in) of a 3-px image sits at 2/3 of the half-width.
  EXPECT_NEAR(corner.x() / corner.z(), -std::tan(m.hfov_rad / 2) * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(corner.y() / corner.z(), -std::tan(m.vfov_rad / 2) * 2.0 / 3.0, 1e-15);
}

TEST(LookAt, AxesConvention) {
  const CameraPose p = look_at(Vec3(0, 0, 0.5), Vec3::Zero());
  EXPECT_LT((p.orientation * Vec3::UnitZ() - Vec3(0, 0, -1)).norm(), 1e-15);
  EXPECT_LT((p.orientation * Vec3::UnitY() + Vec3::UnitY()).norm(), 1e-15);
  EXPECT_LT((p.to_world(p.to_camera(Vec3(1, 2, 3))) - Vec3(1, 2, 3)).norm(), 1e-15);
  // Looking straight along the up vector still yields a valid frame.
  const CameraPose q = look_at(Vec3(0, 1, 0), Vec3::Zero());
  EXPECT_NEAR(q.orientation.norm(), 1.0, 1e-15);
}

TEST(Simulate, FacingAwayIsEmpty) {
  const TriMesh t = generate_tablet(0.16, 0.10, 0.005);
  const Bvh bvh(t);
  const CameraPose away = look_at(Vec3(0, 0, 0.5), Vec3(0, 0, 1.0));
  EXPECT_TRUE(simulate_cloud(t, bvh, away, CameraModel{}, 1).points.empty());
}

TEST(Simulate, NoiselessPointsLieOnSurface) {
  const TriMesh t = generate_tablet(0.16, 0.10, 0.005);
  const Bvh bvh(t);
  CameraModel m;
  m.a = 0.0;
  m.stride = 4;
  const CameraPose pose = look_at(Vec3(0, 0, 0.5), Vec3::Zero());
  const PointCloud c = simulate_cloud(t, bvh, pose, m, 1);
  ASSERT_GT(c.points.size(), 1000u);
  for (const auto& p : c.points) {
    const Vec3 w = pose.to_world(p);
    EXPECT_LE(std::abs(w.z()), 1e-9);
    EXPECT_LE(std::abs(w.x()), 0.08 + 1e-9);
    EXPECT_LE(std::abs(w.y()), 0.05 + 1e-9);
  }
}

TEST(Simulate, WindowMatchesFullScan) {
  // The simulator only scans pixels covering the projected bounding box;
  // scanning every pixel must give the same points.
  const TriMesh small = generate_tablet(0.04, 0.03, 0.005);
  CameraModel m;
  m.stride = 3;
  m.a = 0.0;
  const CameraPose pose = look_at(Vec3(0.01, 0.0, 0.3), Vec3::Zero());
  const Bvh bvh(small);
  const PointCloud windowed = simulate_cloud(small, bvh, pose, m, 5);

  std::vector<Vec3> full;
  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  for (int v = 0; v < m.height_px; v += m.stride) {
    for (int u = 0; u < m.width_px; u += m.stride) {
      const Vec3 ray = m.pixel_ray(u, v);
      if (const auto hit = ray_cast_hit(bvh, small, pose.position, rot * ray)) full.push_back(hit->t * ray);
    }
  }
  ASSERT_EQ(windowed.points.size(), full.size());
  for (std::size_t i = 0; i < full.size(); ++i) EXPECT_EQ(windowed.points[i], full[i]);
}

TEST(Simulate, DeterministicAndSeedDependent) {
  const TriMesh t = generate_tablet(0.05, 0.05, 0.005);
  const Bvh bvh(t);
  CameraModel m;
  m.stride = 8;
  const CameraPose pose = look_at(Vec3(0, 0, 0.5), Vec3::Zero());
  const auto a = simulate_cloud(t, bvh, pose, m, 42);
  const auto b = simulate_cloud(t, bvh, pose, m, 42);
  const auto c = simulate_cloud(t, bvh, pose, m, 43);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
  EXPECT_NE(a.points[0], c.points[0]);
}

TEST(Simulate, RangeLimits) {
  const TriMesh t = generate_tablet(0.05, 0.05, 0.005);
  CameraModel m;
  m.stride = 8;
  m.max_range_m = 0.4;
  EXPECT_TRUE(simulate_cloud(t, Bvh(t), look_at(Vec3(0, 0, 0.5), Vec3::Zero()), m, 1).points.empty());
}

TEST(Simulate, MonteCarloStdMatchesModel) {
  // Narrow field of view so every ray has range ~0.5 m.
  const TriMesh t = generate_tablet(0.2, 0.2, 0.01);
  const Bvh bvh(t);
  CameraModel m;
  m.hfov_rad = 0.02;
  m.vfov_rad = 0.02;
  m.width_px = 320;
  m.height_px = 320;
  const CameraPose pose = look_at(Vec3(0, 0, 0.5), Vec3::Zero());
  CameraModel clean = m;
  clean.a = 0.0;
  const auto noisy = simulate_cloud(t, bvh, pose, m, 2024);
  const auto truth = simulate_cloud(t, bvh, pose, clean, 2024);
  ASSERT_EQ(noisy.points.size(), truth.points.size());
  ASSERT_GE(noisy.points.size(), 100000u);
  const double n = static_cast<double>(noisy.points.size());
  const double sigma = noise_sigma(m, 0.5);
  for (int axis = 0; axis < 3; ++axis) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < noisy.points.size(); ++i) {
      const double e = noisy.points[i][axis] - truth.points[i][axis];
      s1 += e;
      s2 += e * e;
    }
    const double std = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
    EXPECT_NEAR(std / sigma, 1.0, 0.02) << "axis " << axis;
  }
}

TEST(CloudIo, RoundTrips) {
  PointCloud c;
  c.pose = look_at(Vec3(0.1, 0.2, 0.5), Vec3::Zero());
  c.seq = 7;
  c.config_hash = "abc";
  c.model.stride = 3;
  const auto empty_path = scratch("empty.ply").string();
  write_cloud(c, empty_path);
  EXPECT_TRUE(read_cloud(empty_path).points.empty());

  c.points = {{0.1, 0.2, 0.3}, {-1.0 / 3.0, 1e-17, 5.0}, {std::nextafter(1.0, 2.0), 0, 0}};
  const auto path = scratch("three.ply").string();
  write_cloud(c, path);
  const PointCloud r = read_cloud(path);
  ASSERT_EQ(r.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.points[i], c.points[i]);
  EXPECT_EQ(r.seq, 7u);
  EXPECT_EQ(r.config_hash, "abc");
  EXPECT_EQ(r.model.stride, 3);
  EXPECT_EQ(r.pose.position, c.pose.position);
  EXPECT_EQ(r.pose.orientation.coeffs(), c.pose.orientation.coeffs());
  EXPECT_EQ(cloud_sidecar_path(path), scratch("three.json").string());
}

TEST(CloudIo, LargeCloudIsExact) {
  const TriMesh t = generate_tablet(0.16, 0.10, 0.005);
  const Bvh bvh(t);
  CameraModel m;
  m.stride = 1;
  const PointCloud c = simulate_cloud(t, bvh, look_at(Vec3(0, 0, 0.5), Vec3::Zero()), m, 9);
  ASSERT_GE(c.points.size(), 30000u);
  const auto path = scratch("large.ply").string();
  write_cloud(c, path);
  const PointCloud r = read_cloud(path);
  ASSERT_EQ(r.points.size(), c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) ASSERT_EQ(r.points[i], c.points[i]);
}

TEST(CloudIo, MalformedFiles) {
  const auto path = scratch("bad.ply").string();
  {
    std::ofstream out(path);
    out << "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\n"
           "property double z\nend_header\n0 0 0\n";
  }
  EXPECT_THROW(read_cloud(path), ParseError);
  EXPECT_THROW(read_cloud(scratch("missing.ply").string()), ParseError);
}
