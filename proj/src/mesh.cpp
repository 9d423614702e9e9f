#include "cadinspect/mesh.hpp"
#include "cadinspect/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace cadinspect {

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const auto nv = vertices_.size();
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw GeometryError("mesh vertex has non-finite coordinate");
  }
  normals_.resize(faces_.size(), Vec3::Zero());
  areas_.resize(faces_.size(), 0.0);
  degenerate_.resize(faces_.size(), 0);
  adjacency_.resize(nv);
  vertex_faces_.resize(nv);

  std::map<Edge, int> edge_use;
  for (std::size_t j = 0; j < faces_.size(); ++j) {
    const Face& f = faces_[j];
    for (auto idx : f) {
      if (idx >= nv) {
        throw GeometryError("face " + std::to_string(j) + " references missing vertex " +
                            std::to_string(idx));
      }
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw GeometryError("face " + std::to_string(j) + " repeats a vertex index");
    }
    const Vec3 cross = (vertices_[f[1]] - vertices_[f[0]]).cross(vertices_[f[2]] - vertices_[f[0]]);
    const double norm = cross.norm();
    areas_[j] = 0.5 * norm;
    const double scale = std::max({(vertices_[f[1]] - vertices_[f[0]]).squaredNorm(),
                                   (vertices_[f[2]] - vertices_[f[0]]).squaredNorm(),
                                   (vertices_[f[2]] - vertices_[f[1]]).squaredNorm()});
    if (norm <= 1e-14 * scale || norm == 0.0) {
      degenerate_[j] = 1;
    } else {
      normals_[j] = cross / norm;
    }
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = f[e], b = f[(e + 1) % 3];
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
      vertex_faces_[a].push_back(static_cast<std::uint32_t>(j));
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  for (auto& vf : vertex_faces_) {
    std::sort(vf.begin(), vf.end());
    vf.erase(std::unique(vf.begin(), vf.end()), vf.end());
  }
  for (const auto& [edge, count] : edge_use) {
    if (count == 1) boundary_.push_back(edge);
  }
}

const Vec3& TriMesh::face_normal(std::size_t j) const {
  if (degenerate_.at(j)) {
    throw GeometryError("face " + std::to_string(j) + " has zero area; normal undefined");
  }
  return normals_[j];
}

Vec3 TriMesh::face_centroid(std::size_t j) const {
  const Face& f = faces_[j];
  return (vertices_[f[0]] + vertices_[f[1]] + vertices_[f[2]]) / 3.0;
}

std::array<Vec3, 3> TriMesh::face_corners(std::size_t j) const {
  const Face& f = faces_[j];
  return {vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]};
}

double TriMesh::area() const {
  double total = 0.0;
  for (double a : areas_) total += a;
  return total;
}

Eigen::AlignedBox3d TriMesh::bounding_box() const {
  Eigen::AlignedBox3d box;
  for (const auto& v : vertices_) box.extend(v);
  return box;
}

double TriMesh::distance_to_boundary(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : boundary_) {
    best = std::min(best, point_segment_distance(p, vertices_[e[0]], vertices_[e[1]]));
  }
  return best;
}

std::uint64_t TriMesh::fingerprint() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(faces_.size()));
  for (const auto& f : faces_) {
    for (auto idx : f) {
      for (int c = 0; c < 3; ++c) h.add(vertices_[idx][c]);
    }
  }
  return h.value();
}

TriMesh apply_state(const TriMesh& mesh, std::span<const double> per_vertex_state,
                    std::span<const Vec3> normals) {
  if (per_vertex_state.size() != mesh.num_vertices() || normals.size() != mesh.num_vertices()) {
    throw GeometryError("apply_state: expected " + std::to_string(mesh.num_vertices()) +
                        " states and normals, got " + std::to_string(per_vertex_state.size()) +
                        " and " + std::to_string(normals.size()));
  }
  std::vector<Vec3> moved = mesh.vertices();
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (per_vertex_state[i] != 0.0) moved[i] += per_vertex_state[i] * normals[i];
  }
  return TriMesh(std::move(moved), mesh.faces());
}

}  // namespace cadinspect
