#pragma once

#include "cadinspect/geometry.hpp"
#include "cadinspect/mesh.hpp"

#include <optional>
#include <vector>

namespace cadinspect {

// Median-split bounding volume hierarchy over the faces of one mesh. Holds
// face indices only; every query also takes the mesh it was built from.
class Bvh {
 public:
  struct Node {
    Eigen::AlignedBox3d box;
    // Interior: children at left/right. Leaf: faces [first, first + count).
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t first = 0;
    std::uint32_t count = 0;
    bool is_leaf() const { return count > 0; }
  };

  static constexpr std::uint32_t kLeafSize = 4;

  Bvh() = default;
  explicit Bvh(const TriMesh& mesh);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& leaf_faces() const { return face_order_; }
  std::size_t num_faces() const { return face_order_.size(); }
  std::size_t depth() const { return depth_; }
  std::uint64_t mesh_fingerprint() const { return fingerprint_; }

 private:
  std::uint32_t build(const TriMesh& mesh, std::vector<Vec3>& centroids, std::uint32_t first,
                      std::uint32_t count, std::size_t level);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> face_order_;
  std::size_t depth_ = 0;
  std::uint64_t fingerprint_ = 0;
};

// Throws GeometryError for an empty mesh.
Bvh build_bvh(const TriMesh& mesh);

struct RayHit {
  std::uint32_t face_index = 0;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
};

// Nearest hit with t >= t_min. Equal distances (within kHitTieEps) resolve to
// the lowest face index.
std::optional<RayHit> ray_cast_hit(const Bvh& bvh, const TriMesh& mesh, const Vec3& origin,
                                   const Vec3& direction, double t_min = 0.0);

struct ClosestHit {
  std::uint32_t face_index = 0;
  Vec3 point = Vec3::Zero();
  double distance = 0.0;
};

// Closest point on the mesh surface; ties resolve to the lowest face index.
std::optional<ClosestHit> closest_point(const Bvh& bvh, const TriMesh& mesh, const Vec3& query);

enum class CorrespondenceMode { ray, closest_point };

// How correspond() pairs a measured point with the nominal mesh.
enum class CorrespondencePolicy {
  ray_with_fallback,  // camera ray first, closest point if the ray misses
  ray_only,
  closest_point_only,
};

struct Correspondence {
  std::uint32_t face_index = 0;
  Vec3 footpoint = Vec3::Zero();
  double signed_offset = 0.0;    // n_j . (z - footpoint)
  double border_distance = 0.0;  // footpoint to the nearest boundary edge
  CorrespondenceMode mode = CorrespondenceMode::ray;
};

// Ray-cast from origin along a unit direction; nullopt on a miss.
std::optional<Correspondence> ray_cast(const Bvh& bvh, const TriMesh& mesh, const Vec3& origin,
                                       const Vec3& direction);

// Pairs a world-frame point with the nominal mesh along the camera ray
// camera_origin -> point, falling back to the closest surface point.
std::optional<Correspondence> correspond(
    const Bvh& bvh, const TriMesh& mesh, const Vec3& point_world, const Vec3& camera_origin,
    CorrespondencePolicy policy = CorrespondencePolicy::ray_with_fallback);

}  // namespace cadinspect
