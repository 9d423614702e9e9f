#include "cadinspect/mesh.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

using namespace cadinspect;

namespace {

// Fig. mesh example: 5 vertices, 3 faces (0-based).
TriMesh fan_mesh() {
  return TriMesh({{0, 0, 0}, {3, 0, 0}, {6, -1, 0}, {5, 2, 0}, {2, 2, 0}}, {{0, 1, 4}, {1, 3, 4}, {1, 2, 3}});
}

void put_f32(std::string& out, float f) {
  char b[4];
  std::memcpy(b, &f, 4);
  out.append(b, 4);
}

// Binary STL built byte by byte, independent of write_stl.
std::string binary_stl(const std::vector<std::array<Vec3, 3>>& tris) {
  std::string out(80, '\0');
  const auto n = static_cast<std::uint32_t>(tris.size());
  out.append(reinterpret_cast<const char*>(&n), 4);
  for (const auto& t : tris) {
    Vec3 nrm = (t[1] - t[0]).cross(t[2] - t[0]);
    nrm /= std::sqrt(nrm.squaredNorm());
    for (int k = 0; k < 3; ++k) put_f32(out, static_cast<float>(nrm[k]));
    for (const auto& v : t)
      for (int k = 0; k < 3; ++k) put_f32(out, static_cast<float>(v[k]));
    out.append(2, '\0');
  }
  return out;
}

}  // namespace

TEST(TriMesh, FanTopology) {
  const TriMesh m = fan_mesh();
  EXPECT_EQ(m.num_vertices(), 5u);
  EXPECT_EQ(m.num_faces(), 3u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(m.face_normal(j).isApprox(Vec3::UnitZ(), 1e-15));
  // Vertex 5 (1-based) neighbours 1, 2, 4.
  EXPECT_EQ(m.neighbors(4), (std::vector<std::uint32_t>{0, 1, 3}));
  EXPECT_EQ(m.boundary_edges().size(), 5u);
}

TEST(TriMesh, RejectsBadInput) {
  EXPECT_THROW(TriMesh({{0, 0, 0}, {1, 0, 0}}, {{0, 1, 2}}), GeometryError);
  EXPECT_THROW(TriMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 1}}), GeometryError);
  EXPECT_THROW(TriMesh({{0, 0, 0}, {1, 0, 0}, {0, std::nan(""), 0}}, {{0, 1, 2}}), GeometryError);
  const TriMesh flat({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}});
  EXPECT_TRUE(flat.is_degenerate(0));
  EXPECT_THROW(flat.face_normal(0), GeometryError);
}

TEST(FaceNormal, UnitTriangleAndScaleInvariance) {
  const TriMesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  EXPECT_EQ(face_normal(m, 0), Vec3(0, 0, 1));
  const TriMesh s({{0, 0, 0}, {7, 0, 0}, {0, 7, 0}}, {{0, 1, 2}});
  EXPECT_EQ(face_normal(s, 0), Vec3(0, 0, 1));
}

TEST(FaceNormal, RandomFacesAreUnit) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000; ++i) {
    const TriMesh m({{g(rng), g(rng), g(rng)}, {g(rng), g(rng), g(rng)}, {g(rng), g(rng), g(rng)}}, {{0, 1, 2}});
    if (m.is_degenerate(0)) continue;
    EXPECT_NEAR(m.face_normal(0).norm(), 1.0, 1e-9);
  }
}

TEST(Stl, EmptyBinary) {
  const std::string bytes = write_stl(TriMesh(), StlFormat::binary);
  EXPECT_EQ(bytes.size(), 84u);
  const TriMesh m = parse_stl(bytes);
  EXPECT_EQ(m.num_faces(), 0u);
  EXPECT_EQ(m.num_vertices(), 0u);
}

TEST(Stl, FanRoundTrip) {
  const TriMesh m = fan_mesh();
  for (auto fmt : {StlFormat::ascii, StlFormat::binary}) {
    const std::string bytes = write_stl(m, fmt, "demo");
    if (fmt == StlFormat::ascii) {
      std::size_t facets = 0;
      for (std::size_t p = bytes.find("facet normal"); p != std::string::npos; p = bytes.find("facet normal", p + 1))
        ++facets;
      EXPECT_EQ(facets, 3u);
    }
    const TriMesh r = parse_stl(bytes);
    ASSERT_EQ(r.num_faces(), 3u);
    ASSERT_EQ(r.num_vertices(), 5u);
    EXPECT_EQ(stl_header(bytes), "demo");
    // Same corners per face, in order; welding may renumber vertices.
    for (std::size_t j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) EXPECT_EQ(r.face_corners(j)[k], m.face_corners(j)[k]);
    }
    EXPECT_EQ(r.fingerprint(), m.fingerprint());
  }
}

TEST(Stl, BinaryRecordsRoundTripExactly) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<std::array<Vec3, 3>> tris;
  while (tris.size() < 1000) {
    std::array<Vec3, 3> t;
    for (auto& v : t) v = Vec3(u(rng), u(rng), u(rng));
    if ((t[1] - t[0]).cross(t[2] - t[0]).norm() > 1e-6) tris.push_back(t);
  }
  const std::string in = binary_stl(tris);
  const std::string out = write_stl(parse_stl(in), StlFormat::binary);
  ASSERT_EQ(in.size(), out.size());
  EXPECT_EQ(in.substr(80), out.substr(80));
}

TEST(Stl, AsciiRoundTripIsExactInDouble) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<Vec3> v;
  std::vector<Face> f;
  for (std::uint32_t i = 0; i < 200; ++i) {
    v.push_back({g(rng), g(rng), g(rng)});
    if (i % 3 == 2) f.push_back({i - 2, i - 1, i});
  }
  const TriMesh m(v, f);
  const TriMesh r = parse_stl(write_stl(m, StlFormat::ascii));
  EXPECT_EQ(r.fingerprint(), m.fingerprint());
}

TEST(Stl, MalformedInput) {
  std::string bytes = write_stl(fan_mesh(), StlFormat::binary);
  EXPECT_THROW(parse_stl(bytes.substr(0, 60)), ParseError);
  EXPECT_THROW(parse_stl(bytes.substr(0, bytes.size() - 10)), ParseError);
  const std::string ascii = write_stl(fan_mesh(), StlFormat::ascii);
  EXPECT_THROW(parse_stl(ascii.substr(0, ascii.size() / 2)), ParseError);
}

TEST(Stl, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "cadinspect_test_mesh.stl";
  write_stl_file(fan_mesh(), path.string(), StlFormat::binary, "hdr");
  EXPECT_EQ(read_stl_file(path.string()).fingerprint(), fan_mesh().fingerprint());
  std::filesystem::remove(path);
  EXPECT_THROW(read_stl_file(path.string()), ParseError);
}

TEST(Tablet, Counting) {
  const TriMesh small = generate_tablet(0.010, 0.010, 0.005);
  EXPECT_EQ(small.num_faces(), 8u);
  EXPECT_EQ(small.num_vertices(), 9u);
  const TriMesh t = generate_tablet(0.160, 0.100, 0.005);
  EXPECT_EQ(t.num_faces(), 32u * 20u * 2u);
  for (std::size_t j = 0; j < t.num_faces(); ++j) EXPECT_EQ(t.face_normal(j), Vec3::UnitZ());
  EXPECT_NEAR(t.area(), 0.160 * 0.100, 1e-12 * 0.016);
  const auto box = t.bounding_box();
  EXPECT_NEAR(box.min().x(), -0.08, 1e-15);
  EXPECT_NEAR(box.max().y(), 0.05, 1e-15);
}

TEST(Tablet, AreaMatchesForOddSizes) {
  for (double ms : {0.003, 0.0045, 0.007}) {
    const TriMesh t = generate_tablet(0.05, 0.031, ms);
    EXPECT_NEAR(t.area(), 0.05 * 0.031, 1e-12 * 0.05 * 0.031);
  }
}

TEST(Defect, HemisphereHeight) {
  SphericalDefect d;
  EXPECT_DOUBLE_EQ(d.circle_radius(), 0.005);
  EXPECT_DOUBLE_EQ(d.height_at(0.0), 0.005);
  EXPECT_DOUBLE_EQ(d.height_at(0.005), 0.0);
  EXPECT_DOUBLE_EQ(d.height_at(0.006), 0.0);
  EXPECT_NEAR(d.height_at(0.003), 0.004, 1e-15);
  d.protrusion = Protrusion::inward;
  EXPECT_DOUBLE_EQ(d.height_at(0.0), -0.005);
  d.center_depth_m = 0.003;
  EXPECT_NEAR(d.circle_radius(), 0.004, 1e-15);
  EXPECT_NEAR(d.height_at(0.0), -0.002, 1e-15);
}

TEST(Defect, CentredOnTablet) {
  const TriMesh t = generate_tablet(0.160, 0.100, 0.001);
  SphericalDefect d;
  const TriMesh m = add_spherical_defect(t, d);
  double zmax = 0.0;
  for (const auto& v : m.vertices()) zmax = std::max(zmax, v.z());
  EXPECT_NEAR(zmax, 0.005, 1e-15);  // the centre is a grid vertex
  // Vertices on the circle stay put.
  const TriMesh ring({{0.005, 0, 0}, {-0.003, 0.003, 0}, {-0.003, -0.003, 0}}, {{0, 1, 2}});
  EXPECT_EQ(add_spherical_defect(ring, d).vertex(0).z(), 0.0);
  d.center_xy = {1.0, 1.0};
  EXPECT_THROW(add_spherical_defect(t, d), Error);
}

TEST(Defect, VolumeMatchesCap) {
  // Piecewise-linear volume over a fine grid converges to 2/3 pi r^3.
  const double r = 0.005;
  const TriMesh m = add_spherical_defect(generate_tablet(0.02, 0.02, 0.0002), SphericalDefect{});
  double vol = 0.0;
  for (std::size_t j = 0; j < m.num_faces(); ++j) {
    const auto c = m.face_corners(j);
    const double proj = 0.5 * std::abs((c[1] - c[0]).cross(c[2] - c[0]).z());
    vol += proj * (c[0].z() + c[1].z() + c[2].z()) / 3.0;
  }
  const double cap = 2.0 / 3.0 * M_PI * r * r * r;
  EXPECT_NEAR(vol, cap, 0.01 * cap);
}

TEST(ApplyState, ZeroLiftAndCap) {
  const TriMesh t = generate_tablet(0.02, 0.02, 0.001);
  const std::vector<Vec3> up(t.num_vertices(), Vec3::UnitZ());
  std::vector<double> x(t.num_vertices(), 0.0);
  EXPECT_EQ(apply_state(t, x, up).vertices(), t.vertices());
  std::fill(x.begin(), x.end(), 0.002);
  const TriMesh lifted = apply_state(t, x, up);
  for (const auto& v : lifted.vertices()) EXPECT_NEAR(v.z(), 0.002, 1e-15);

  SphericalDefect d;
  double zmax = 0.0;
  for (std::size_t i = 0; i < t.num_vertices(); ++i) x[i] = d.height_at(t.vertex(i).head<2>().norm());
  const TriMesh capped = apply_state(t, x, up);
  for (const auto& v : capped.vertices()) zmax = std::max(zmax, v.z());
  EXPECT_NEAR(zmax, 0.005, 1e-12);
  EXPECT_THROW(apply_state(t, std::vector<double>(3, 0.0), up), Error);
}

TEST(VertexNormal, PlanarGridAndFanVertex) {
  const TriMesh t = generate_tablet(0.02, 0.02, 0.005);
  for (std::size_t i = 0; i < t.num_vertices(); ++i) {
    if (t.neighbors(i).size() < 2) continue;
    const auto r = vertex_normal_newton(t, i);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.is_minimum);
    EXPECT_NEAR(std::abs(r.direction.z()), 1.0, 1e-9);
    EXPECT_NEAR(r.direction.head<2>().norm(), 0.0, 1e-9);
  }
  const auto r = vertex_normal_newton(fan_mesh(), 4);
  EXPECT_NEAR(std::abs(r.direction.z()), 1.0, 1e-9);
}

TEST(VertexNormal, RandomStarsMatchEigenOracle) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> count(3, 8);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      const Vec3 e(g(rng), g(rng), 0.3 * g(rng));
      d += e * e.transpose();
    }
    const Vec3 expected = oracle::jacobi_smallest_eigenvector(d);
    const Vec3 guess = Vec3(g(rng), g(rng), g(rng)).normalized();
    const auto r = vertex_normal_newton(d, guess);
    ASSERT_TRUE(r.converged);
    EXPECT_TRUE(r.is_minimum);
    EXPECT_LT(std::min((r.direction - expected).norm(), (r.direction + expected).norm()), 1e-6);
    EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
  }
}

TEST(VertexNormal, SaddleSeedIsRestarted) {
  // Seeding exactly on the middle eigenvector lands on a saddle first.
  const Eigen::Matrix3d d = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
  const auto r = vertex_normal_newton(d, Vec3::UnitY());
  EXPECT_TRUE(r.is_minimum);
  EXPECT_NEAR(std::abs(r.direction.x()), 1.0, 1e-9);
  EXPECT_GE(r.restarts, 1);
}

TEST(VertexNormal, IsolatedVertex) {
  const TriMesh m({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}}, {{0, 1, 2}});
  EXPECT_NO_THROW(vertex_normal_newton(m, 0));
  EXPECT_THROW(vertex_normal_newton(m, 3), GeometryError);
  EXPECT_THROW(vertex_normal_newton(m, 9), GeometryError);
}
