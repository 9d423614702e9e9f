#include "cadinspect/registration.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cadinspect;

namespace {

// Closed 10 cm box, a shape that pins down all six rigid degrees of freedom.
TriMesh box_mesh() {
  const double h = 0.05;
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) v.emplace_back(i & 1 ? h : -h, i & 2 ? h : -h, i & 4 ? 0.6 * h : -0.6 * h);
  const std::vector<Face> f{{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
                            {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return TriMesh(v, f);
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t n, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> areas;
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) areas.push_back(mesh.face_area(j));
  std::discrete_distribution<std::size_t> face(areas.begin(), areas.end());
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = mesh.face_corners(face(rng));
    double a = u(rng), b = u(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    Vec3 p = k[0] + a * (k[1] - k[0]) + b * (k[2] - k[0]);
    if (sigma > 0.0) p += Vec3(g(rng), g(rng), g(rng));
    c.points.push_back(p);
  }
  return c;
}

CameraPose as_pose(const RigidTransform& t) {
  CameraPose p;
  p.orientation = t.rotation;
  p.position = t.translation;
  return p;
}

}  // namespace

TEST(RigidTransform, Algebra) {
  const auto a = RigidTransform::from_axis_angle(Vec3(1, 2, 3), 0.3, Vec3(0.1, -0.2, 0.05));
  const auto b = RigidTransform::from_axis_angle(Vec3(-1, 0, 1), 1.1, Vec3(0.0, 0.4, 0.0));
  const Vec3 p(0.3, -0.7, 1.9);
  EXPECT_LT(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 1e-15);
  EXPECT_LT(((a * a.inverse()).apply(p) - p).norm(), 1e-15);
  EXPECT_NEAR(a.rotation_angle(), 0.3, 1e-15);
  EXPECT_EQ(RigidTransform::identity().apply(p), p);
}

TEST(Icp, AlignedNoiselessIsIdentity) {
  const TriMesh m = box_mesh();
  const Bvh bvh(m);
  const PointCloud c = sample_surface(m, 2000, 0.0, 1);
  const IcpResult r = icp_align(c, m, bvh);
  EXPECT_LT(r.transform.translation.norm(), 1e-9);
  EXPECT_LT(r.transform.rotation_angle(), 1e-9);
  EXPECT_LT(r.rms_residual, 1e-12);
}

TEST(Icp, RecoversKnownPerturbation) {
  const TriMesh m = box_mesh();
  const Bvh bvh(m);
  PointCloud c = sample_surface(m, 3000, 0.0, 2);
  const auto error = RigidTransform::from_axis_angle(Vec3(0.3, -1, 0.5), 1.0 * M_PI / 180.0,
                                                     Vec3(0.003, -0.001, 0.002));
  c.pose = as_pose(error);
  IcpOptions opt;
  opt.max_iter = 500;
  opt.tol = 1e-12;
  const IcpResult r = icp_align(c, m, bvh, RigidTransform::identity(), opt);
  const RigidTransform expected = error.inverse();
  EXPECT_LT((r.transform.translation - expected.translation).norm(), 1e-6);
  EXPECT_LT((r.transform * error).rotation_angle(), 1e-6);
  EXPECT_LT(r.rms_residual, 1e-6);
  EXPECT_LT(r.rms_residual, r.initial_rms_residual);
}

TEST(Icp, NoisyCloudDoesNotGetWorse) {
  const TriMesh m = box_mesh();
  const Bvh bvh(m);
  PointCloud c = sample_surface(m, 4000, 0.002, 3);
  c.pose = as_pose(RigidTransform::from_axis_angle(Vec3(1, 1, 0), 1.0 * M_PI / 180.0, Vec3(0.003, 0, 0)));
  const IcpResult r = icp_align(c, m, bvh);
  EXPECT_LE(r.rms_residual, r.initial_rms_residual);
  EXPECT_NEAR(rms_point_to_mesh(c, m, bvh, r.transform), r.rms_residual, 1e-15);
}

TEST(Icp, TooFewPoints) {
  const TriMesh m = box_mesh();
  PointCloud c;
  c.points = {Vec3(0, 0, 0.03), Vec3(0.01, 0, 0.03)};
  EXPECT_THROW(icp_align(c, m, Bvh(m)), Error);
}
