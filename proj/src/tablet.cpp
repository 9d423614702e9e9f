#include "cadinspect/mesh.hpp"

#include <cmath>

namespace cadinspect {

TriMesh generate_tablet(double width_m, double height_m, double mesh_size_m) {
  if (!(width_m > 0.0) || !(height_m > 0.0) || !(mesh_size_m > 0.0)) {
    throw GeometryError("generate_tablet: width, height and mesh size must be positive");
  }
  // Round the cell count down so legs are never shorter than mesh_size; the
  // 1e-9 slack absorbs representation error in exact divisions.
  const auto nx = static_cast<std::uint32_t>(std::max(1.0, std::floor(width_m / mesh_size_m + 1e-9)));
  const auto ny = static_cast<std::uint32_t>(std::max(1.0, std::floor(height_m / mesh_size_m + 1e-9)));
  const double dx = width_m / nx;
  const double dy = height_m / ny;

  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (std::uint32_t j = 0; j <= ny; ++j) {
    for (std::uint32_t i = 0; i <= nx; ++i) {
      vertices.emplace_back(-0.5 * width_m + i * dx, -0.5 * height_m + j * dy, 0.0);
    }
  }
  auto id = [nx](std::uint32_t i, std::uint32_t j) { return j * (nx + 1) + i; };

  std::vector<Face> faces;
  faces.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (std::uint32_t j = 0; j < ny; ++j) {
    for (std::uint32_t i = 0; i < nx; ++i) {
      const auto v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1), v01 = id(i, j + 1);
      faces.push_back({v00, v10, v11});
      faces.push_back({v00, v11, v01});
    }
  }
  return TriMesh(std::move(vertices), std::move(faces));
}

double SphericalDefect::circle_radius() const {
  const double r2 = sphere_radius_m * sphere_radius_m - center_depth_m * center_depth_m;
  return r2 > 0.0 ? std::sqrt(r2) : 0.0;
}

double SphericalDefect::height_at(double rho) const {
  if (rho >= circle_radius()) return 0.0;
  const double h = std::sqrt(sphere_radius_m * sphere_radius_m - rho * rho) - center_depth_m;
  return protrusion == Protrusion::outward ? h : -h;
}

TriMesh add_spherical_defect(const TriMesh& mesh, const SphericalDefect& defect) {
  if (!(defect.sphere_radius_m > 0.0)) throw GeometryError("defect radius must be positive");
  if (std::abs(defect.center_depth_m) >= defect.sphere_radius_m) {
    throw GeometryError("defect sphere does not intersect the surface");
  }
  const auto box = mesh.bounding_box();
  const auto& c = defect.center_xy;
  if (mesh.empty() || c.x() < box.min().x() || c.x() > box.max().x() || c.y() < box.min().y() ||
      c.y() > box.max().y()) {
    throw GeometryError("defect centre lies outside the workpiece");
  }
  std::vector<Vec3> moved = mesh.vertices();
  for (auto& v : moved) {
    const double rho = std::hypot(v.x() - c.x(), v.y() - c.y());
    v.z() += defect.height_at(rho);
  }
  return TriMesh(std::move(moved), mesh.faces());
}

}  // namespace cadinspect
