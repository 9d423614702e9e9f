#include "cadinspect/raycast.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace cadinspect {
namespace {

Eigen::AlignedBox3d face_box(const TriMesh& mesh, std::uint32_t j) {
  Eigen::AlignedBox3d box;
  for (auto idx : mesh.face(j)) box.extend(mesh.vertex(idx));
  return box;
}

// Nearest-hit tie rule shared by ray and closest-point queries: strictly
// closer wins, equal (within eps) goes to the lower face index.
bool better(double t, std::uint32_t face, double best_t, std::uint32_t best_face) {
  if (t < best_t - kHitTieEps) return true;
  return t <= best_t + kHitTieEps && face < best_face;
}

Correspondence make_correspondence(const TriMesh& mesh, std::uint32_t face, const Vec3& footpoint,
                                   const Vec3& measured, CorrespondenceMode mode) {
  Correspondence c;
  c.face_index = face;
  c.footpoint = footpoint;
  c.signed_offset = mesh.face_normal(face).dot(measured - footpoint);
  c.border_distance = mesh.distance_to_boundary(footpoint);
  c.mode = mode;
  return c;
}

}  // namespace

Bvh::Bvh(const TriMesh& mesh) {
  if (mesh.empty()) throw GeometryError("cannot build a BVH over an empty mesh");
  fingerprint_ = mesh.fingerprint();
  face_order_.resize(mesh.num_faces());
  std::iota(face_order_.begin(), face_order_.end(), 0u);
  std::vector<Vec3> centroids(mesh.num_faces());
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) centroids[j] = mesh.face_centroid(j);
  nodes_.reserve(2 * mesh.num_faces() / kLeafSize + 2);
  build(mesh, centroids, 0, static_cast<std::uint32_t>(mesh.num_faces()), 1);
}

std::uint32_t Bvh::build(const TriMesh& mesh, std::vector<Vec3>& centroids, std::uint32_t first,
                         std::uint32_t count, std::size_t level) {
  depth_ = std::max(depth_, level);
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (std::uint32_t k = first; k < first + count; ++k) {
    box.extend(face_box(mesh, face_order_[k]));
    centroid_box.extend(centroids[face_order_[k]]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const std::uint32_t half = count / 2;
  auto begin = face_order_.begin() + first;
  // Ties broken by face index so the split is deterministic.
  std::nth_element(begin, begin + half, begin + count, [&](std::uint32_t a, std::uint32_t b) {
    const double ca = centroids[a][axis], cb = centroids[b][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const auto left = build(mesh, centroids, first, half, level + 1);
  const auto right = build(mesh, centroids, first + half, count - half, level + 1);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

Bvh build_bvh(const TriMesh& mesh) { return Bvh(mesh); }

std::optional<RayHit> ray_cast_hit(const Bvh& bvh, const TriMesh& mesh, const Vec3& origin,
                                   const Vec3& direction, double t_min) {
  const auto& nodes = bvh.nodes();
  if (nodes.empty()) return std::nullopt;
  const Vec3 inv_dir = direction.cwiseInverse();
  double best_t = std::numeric_limits<double>::infinity();
  std::uint32_t best_face = std::numeric_limits<std::uint32_t>::max();

  std::array<std::uint32_t, 128> stack;
  std::size_t top = 0;
  if (!intersect_ray_box(origin, inv_dir, nodes[0].box, t_min, best_t)) return std::nullopt;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = nodes[stack[--top]];
    const double limit = best_t + kHitTieEps;
    if (node.is_leaf()) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
        const auto j = bvh.leaf_faces()[k];
        const auto& f = mesh.face(j);
        const auto hit = intersect_ray_triangle(origin, direction, mesh.vertex(f[0]),
                                                mesh.vertex(f[1]), mesh.vertex(f[2]), t_min);
        if (hit && better(hit->t, j, best_t, best_face)) {
          best_t = hit->t;
          best_face = j;
        }
      }
      continue;
    }
    const auto tl = intersect_ray_box(origin, inv_dir, nodes[node.left].box, t_min, limit);
    const auto tr = intersect_ray_box(origin, inv_dir, nodes[node.right].box, t_min, limit);
    // Push the farther child first so the nearer one is popped next.
    if (tl && tr) {
      if (*tl <= *tr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    } else if (tl) {
      stack[top++] = node.left;
    } else if (tr) {
      stack[top++] = node.right;
    }
  }
  if (best_face == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return RayHit{best_face, best_t, origin + best_t * direction};
}

std::optional<ClosestHit> closest_point(const Bvh& bvh, const TriMesh& mesh, const Vec3& query) {
  const auto& nodes = bvh.nodes();
  if (nodes.empty()) return std::nullopt;
  double best_d = std::numeric_limits<double>::infinity();
  std::uint32_t best_face = std::numeric_limits<std::uint32_t>::max();
  Vec3 best_point = Vec3::Zero();

  std::array<std::uint32_t, 128> stack;
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const auto& node = nodes[stack[--top]];
    if (std::sqrt(squared_distance_to_box(query, node.box)) > best_d + kHitTieEps) continue;
    if (node.is_leaf()) {
      for (std::uint32_t k = node.first; k < node.first + node.count; ++k) {
        const auto j = bvh.leaf_faces()[k];
        if (mesh.is_degenerate(j)) continue;
        const auto& f = mesh.face(j);
        const Vec3 p = closest_point_on_triangle(query, mesh.vertex(f[0]), mesh.vertex(f[1]),
                                                 mesh.vertex(f[2]));
        const double d = (p - query).norm();
        if (better(d, j, best_d, best_face)) {
          best_d = d;
          best_face = j;
          best_point = p;
        }
      }
      continue;
    }
    const double dl = squared_distance_to_box(query, nodes[node.left].box);
    const double dr = squared_distance_to_box(query, nodes[node.right].box);
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  if (best_face == std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  return ClosestHit{best_face, best_point, best_d};
}

std::optional<Correspondence> ray_cast(const Bvh& bvh, const TriMesh& mesh, const Vec3& origin,
                                       const Vec3& direction) {
  const auto hit = ray_cast_hit(bvh, mesh, origin, direction);
  if (!hit) return std::nullopt;
  // With no measured point, the offset is that of the ray origin.
  return make_correspondence(mesh, hit->face_index, hit->point, origin,
                             CorrespondenceMode::ray);
}

std::optional<Correspondence> correspond(const Bvh& bvh, const TriMesh& mesh,
                                         const Vec3& point_world, const Vec3& camera_origin,
                                         CorrespondencePolicy policy) {
  if (policy != CorrespondencePolicy::closest_point_only) {
    const Vec3 ray = point_world - camera_origin;
    const double len = ray.norm();
    if (len > 0.0) {
      const auto hit = ray_cast_hit(bvh, mesh, camera_origin, ray / len);
      if (hit) {
        return make_correspondence(mesh, hit->face_index, hit->point, point_world,
                                   CorrespondenceMode::ray);
      }
    }
    if (policy == CorrespondencePolicy::ray_only) return std::nullopt;
  }
  const auto near = closest_point(bvh, mesh, point_world);
  if (!near) return std::nullopt;
  return make_correspondence(mesh, near->face_index, near->point, point_world,
                             CorrespondenceMode::closest_point);
}

}  // namespace cadinspect
