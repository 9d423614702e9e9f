#pragma once

#include "cadinspect/common.hpp"

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cadinspect {

using Face = std::array<std::uint32_t, 3>;
using Edge = std::array<std::uint32_t, 2>;

// Triangle mesh in metres. Immutable after construction: normals, areas,
// adjacency and boundary edges are derived once in the constructor so a mesh
// can be shared freely between threads.
class TriMesh {
 public:
  TriMesh() = default;

  // Throws GeometryError if a face references a missing vertex, repeats a
  // vertex, or a coordinate is non-finite. Zero-area faces are accepted but
  // marked degenerate; face_normal() refuses them.
  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_faces() const { return faces_.size(); }
  bool empty() const { return faces_.empty(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const Vec3& vertex(std::size_t i) const { return vertices_[i]; }
  const Face& face(std::size_t j) const { return faces_[j]; }

  // Unit normal of (V2-V1)x(V3-V1). Throws GeometryError on zero-area faces.
  const Vec3& face_normal(std::size_t j) const;
  bool is_degenerate(std::size_t j) const { return degenerate_[j] != 0; }
  double face_area(std::size_t j) const { return areas_[j]; }
  Vec3 face_centroid(std::size_t j) const;
  std::array<Vec3, 3> face_corners(std::size_t j) const;

  double area() const;
  Eigen::AlignedBox3d bounding_box() const;

  // Vertices sharing an edge with vertex i, ascending.
  const std::vector<std::uint32_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
  // Faces incident to vertex i, ascending.
  const std::vector<std::uint32_t>& incident_faces(std::size_t i) const { return vertex_faces_[i]; }

  // Edges used by exactly one face, as (lower, higher) vertex index pairs.
  const std::vector<Edge>& boundary_edges() const { return boundary_; }

  // Distance from p to the closest boundary edge segment; +inf when the mesh
  // is closed.
  double distance_to_boundary(const Vec3& p) const;

  // Hash over per-face corner coordinates, independent of vertex numbering.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Vec3> normals_;
  std::vector<double> areas_;
  std::vector<char> degenerate_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
  std::vector<std::vector<std::uint32_t>> vertex_faces_;
  std::vector<Edge> boundary_;
};

// Convenience free function mirroring TriMesh::face_normal.
inline const Vec3& face_normal(const TriMesh& mesh, std::size_t face_index) {
  return mesh.face_normal(face_index);
}

// ---------------------------------------------------------------------------
// STL input/output

enum class StlFormat { binary, ascii };

// Parses binary or ASCII STL. Vertices equal after quantization to 1e-9 m are
// merged; face order follows the file.
TriMesh parse_stl(std::string_view bytes);

// 80-byte binary header, or the name after "solid" for ASCII files, with
// trailing padding removed.
std::string stl_header(std::string_view bytes);

// Binary output writes float32 coordinates; ASCII output writes 17
// significant digits so double coordinates survive a round trip.
std::string write_stl(const TriMesh& mesh, StlFormat format, std::string_view header = {});

TriMesh read_stl_file(const std::string& path);
void write_stl_file(const TriMesh& mesh, const std::string& path, StlFormat format,
                    std::string_view header = {});

// ---------------------------------------------------------------------------
// Vertex normals chosen "as normal as possible" to the one-ring:
// minimise sum_j (d_ij . n)^2 subject to |n| = 1, solved by Newton on the
// Lagrangian first-order conditions.

struct VertexNormal {
  Vec3 direction = Vec3::Zero();
  double lagrange_multiplier = 0.0;
  bool converged = false;
  // Projected Hessian of the Lagrangian on the tangent plane of the unit
  // sphere is positive semidefinite at the solution.
  bool is_minimum = false;
  int iterations = 0;
  int restarts = 0;
  double residual_norm = 0.0;
  double cost = 0.0;
};

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 50;
  int max_restarts = 3;
};

// D = sum over neighbours of (V_i - V_j)(V_i - V_j)^T.
Eigen::Matrix3d neighbour_scatter(const TriMesh& mesh, std::size_t vertex_index);

// Solves the first-order system from initial_guess. Singular Jacobians and
// saddle/maximum solutions trigger re-seeding (up to max_restarts). Throws
// GeometryError for vertices with fewer than two neighbours and NumericError
// if every seed hits a singular Jacobian.
VertexNormal vertex_normal_newton(const TriMesh& mesh, std::size_t vertex_index,
                                  const Vec3& initial_guess, const NewtonOptions& options = {});

// Seeds with the mean of incident face normals.
VertexNormal vertex_normal_newton(const TriMesh& mesh, std::size_t vertex_index,
                                  const NewtonOptions& options = {});

// Star-only variant used for random one-rings that are not embedded in a mesh.
VertexNormal vertex_normal_newton(const Eigen::Matrix3d& scatter, const Vec3& initial_guess,
                                  const NewtonOptions& options = {});

// One normal per vertex, oriented to agree with the incident face normals.
std::vector<Vec3> vertex_normals(const TriMesh& mesh, const NewtonOptions& options = {});

// V_i <- V_i + x_i n_i. Faces are unchanged.
TriMesh apply_state(const TriMesh& mesh, std::span<const double> per_vertex_state,
                    std::span<const Vec3> normals);

// ---------------------------------------------------------------------------
// Synthetic workpieces

// Planar z = 0 rectangle centred on the origin, tiled with right isosceles
// triangles of leg length >= mesh_size. Every face normal is +z.
TriMesh generate_tablet(double width_m, double height_m, double mesh_size_m);

enum class Protrusion { outward, inward };

struct SphericalDefect {
  Eigen::Vector2d center_xy = Eigen::Vector2d::Zero();
  double sphere_radius_m = 0.005;
  // Depth of the sphere centre below the surface. 0 gives a hemisphere whose
  // cap height equals the radius.
  double center_depth_m = 0.0;
  Protrusion protrusion = Protrusion::outward;

  double circle_radius() const;
  // Signed height of the defect above the undeformed surface at planar
  // distance rho from the centre; 0 outside the intersection circle.
  double height_at(double rho) const;
};

// Displaces vertices inside the intersection circle along z onto the sphere.
TriMesh add_spherical_defect(const TriMesh& mesh, const SphericalDefect& defect);

}  // namespace cadinspect
