#include "cadinspect/sensor.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace cadinspect {
namespace {

// SplitMix64 as a UniformRandomBitGenerator; cheap to seed per ray.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t ray_index) {
  SplitMix64 mix(seed ^ (ray_index * 0xd1b54a32d192ed03ULL));
  mix();
  return mix();
}

}  // namespace

CameraPose look_at(const Vec3& position, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - position).normalized();
  Vec3 down = -up.normalized();
  if (std::abs(down.dot(z)) > 1.0 - 1e-9) {
    down = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  }
  const Vec3 x = down.cross(z).normalized();
  const Vec3 y = z.cross(x);
  Eigen::Matrix3d rot;
  rot << x, y, z;
  CameraPose pose;
  pose.position = position;
  pose.orientation = Eigen::Quaterniond(rot).normalized();
  return pose;
}

void CameraModel::validate() const {
  if (!(a >= 0.0)) throw Error("camera noise coefficient a must be non-negative");
  if (width_px <= 0 || height_px <= 0) throw Error("camera resolution must be positive");
  if (!(hfov_rad > 0.0 && hfov_rad < M_PI) || !(vfov_rad > 0.0 && vfov_rad < M_PI)) {
    throw Error("camera field of view must lie in (0, pi)");
  }
  if (stride <= 0) throw Error("pixel stride must be positive");
  if (!(min_range_m >= 0.0) || !(max_range_m > min_range_m)) throw Error("invalid camera range limits");
}

Vec3 CameraModel::pixel_ray(int u, int v) const {
  const double x = std::tan(0.5 * hfov_rad) * ((u + 0.5) * 2.0 / width_px - 1.0);
  const double y = std::tan(0.5 * vfov_rad) * ((v + 0.5) * 2.0 / height_px - 1.0);
  return Vec3(x, y, 1.0).normalized();
}

double noise_sigma(const CameraModel& model, double range_m) {
  if (!(range_m >= 0.0)) throw Error("noise_sigma: range must be non-negative");
  return model.a * std::exp(model.b * range_m);
}

PointCloud simulate_cloud(const TriMesh& truth_mesh, const Bvh& bvh, const CameraPose& pose,
                          const CameraModel& model, std::uint64_t rng_seed) {
  model.validate();
  PointCloud cloud;
  cloud.pose = pose;
  cloud.model = model;
  if (truth_mesh.empty()) return cloud;

  // Pixel window covering the projection of the mesh bounding box. When any
  // corner lies behind the camera the whole image is scanned.
  int u_lo = 0, u_hi = model.width_px - 1, v_lo = 0, v_hi = model.height_px - 1;
  {
    const auto box = truth_mesh.bounding_box();
    const double tx = std::tan(0.5 * model.hfov_rad), ty = std::tan(0.5 * model.vfov_rad);
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    bool in_front = true;
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 c = pose.to_camera(box.corner(static_cast<Eigen::AlignedBox3d::CornerType>(corner)));
      if (c.z() <= 1e-9) {
        in_front = false;
        break;
      }
      const double u = (c.x() / c.z() / tx + 1.0) * 0.5 * model.width_px - 0.5;
      const double v = (c.y() / c.z() / ty + 1.0) * 0.5 * model.height_px - 0.5;
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
    if (in_front) {
      u_lo = std::max(u_lo, static_cast<int>(std::floor(umin)) - 1);
      u_hi = std::min(u_hi, static_cast<int>(std::ceil(umax)) + 1);
      v_lo = std::max(v_lo, static_cast<int>(std::floor(vmin)) - 1);
      v_hi = std::min(v_hi, static_cast<int>(std::ceil(vmax)) + 1);
    }
  }
  const int s = model.stride;
  u_lo = (u_lo + s - 1) / s * s;
  v_lo = (v_lo + s - 1) / s * s;

  const Eigen::Matrix3d rot = pose.orientation.toRotationMatrix();
  for (int v = v_lo; v <= v_hi; v += s) {
    for (int u = u_lo; u <= u_hi; u += s) {
      const Vec3 ray_c = model.pixel_ray(u, v);
      const auto hit = ray_cast_hit(bvh, truth_mesh, pose.position, rot * ray_c);
      if (!hit || hit->t < model.min_range_m || hit->t > model.max_range_m) continue;
      Vec3 p = hit->t * ray_c;
      const double sigma = noise_sigma(model, hit->t);
      if (sigma > 0.0) {
        SplitMix64 engine(stream_seed(rng_seed, static_cast<std::uint64_t>(v) * model.width_px + u));
        std::normal_distribution<double> gauss(0.0, sigma);
        for (int c = 0; c < 3; ++c) p[c] += gauss(engine);
      }
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

std::string cloud_sidecar_path(const std::string& ply_path) {
  return std::filesystem::path(ply_path).replace_extension(".json").string();
}

void write_cloud(const PointCloud& cloud, const std::string& ply_path) {
  {
    std::ofstream out(ply_path);
    if (!out) throw Error("cannot write point cloud " + ply_path);
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.points.size() << '\n';
    out << "property double x\nproperty double y\nproperty double z\nend_header\n";
    out.precision(17);
    for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    if (!out) throw Error("write failed for " + ply_path);
  }
  nlohmann::json side;
  const auto& q = cloud.pose.orientation;
  side["position"] = {cloud.pose.position.x(), cloud.pose.position.y(), cloud.pose.position.z()};
  side["quaternion"] = {q.w(), q.x(), q.y(), q.z()};
  side["seq"] = cloud.seq;
  const auto& m = cloud.model;
  side["model"] = {{"a", m.a},
                   {"b", m.b},
                   {"fov", {m.hfov_rad, m.vfov_rad}},
                   {"res", {m.width_px, m.height_px}},
                   {"range", {m.min_range_m, m.max_range_m}},
                   {"stride", m.stride}};
  side["config_hash"] = cloud.config_hash;
  std::ofstream js(cloud_sidecar_path(ply_path));
  if (!js) throw Error("cannot write sidecar for " + ply_path);
  js << side.dump(2) << '\n';
}

PointCloud read_cloud(const std::string& ply_path) {
  PointCloud cloud;
  std::ifstream in(ply_path);
  if (!in) throw ParseError("cannot open point cloud " + ply_path);
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw ParseError("malformed PLY (missing magic): " + ply_path);
  std::size_t count = 0;
  bool have_count = false;
  std::vector<std::string> properties;
  for (;;) {
    if (!std::getline(in, line)) throw ParseError("malformed PLY (no end_header): " + ply_path);
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw ParseError("only ASCII PLY is supported: " + ply_path);
    } else if (key == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex" || !ls) throw ParseError("malformed PLY element line: " + line);
      have_count = true;
    } else if (key == "property") {
      std::string type, name;
      ls >> type >> name;
      properties.push_back(name);
    }
  }
  if (!have_count || properties.size() < 3 || properties[0] != "x" || properties[1] != "y" ||
      properties[2] != "z") {
    throw ParseError("PLY must declare vertex properties x y z: " + ply_path);
  }
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError("truncated PLY: " + ply_path);
    Vec3 p;
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    for (int c = 0; c < 3; ++c) {
      while (cur < end && *cur == ' ') ++cur;
      const auto [ptr, ec] = std::from_chars(cur, end, p[c]);
      if (ec != std::errc()) throw ParseError("bad PLY coordinate in " + ply_path + ": " + line);
      cur = ptr;
    }
    if (!p.allFinite()) throw ParseError("non-finite PLY coordinate in " + ply_path);
    cloud.points.push_back(p);
  }

  const auto side_path = cloud_sidecar_path(ply_path);
  std::ifstream js(side_path);
  if (!js) throw ParseError("missing point-cloud sidecar " + side_path);
  try {
    const auto side = nlohmann::json::parse(js);
    const auto& pos = side.at("position");
    cloud.pose.position = Vec3(pos.at(0), pos.at(1), pos.at(2));
    const auto& q = side.at("quaternion");
    cloud.pose.orientation = Eigen::Quaterniond(q.at(0), q.at(1), q.at(2), q.at(3));
    if (std::abs(cloud.pose.orientation.norm() - 1.0) > 1e-9) {
      throw ParseError("sidecar quaternion is not unit: " + side_path);
    }
    cloud.seq = side.at("seq");
    const auto& m = side.at("model");
    cloud.model.a = m.at("a");
    cloud.model.b = m.at("b");
    cloud.model.hfov_rad = m.at("fov").at(0);
    cloud.model.vfov_rad = m.at("fov").at(1);
    cloud.model.width_px = m.at("res").at(0);
    cloud.model.height_px = m.at("res").at(1);
    if (m.contains("range")) {
      cloud.model.min_range_m = m["range"].at(0);
      cloud.model.max_range_m = m["range"].at(1);
    }
    if (m.contains("stride")) cloud.model.stride = m["stride"];
    cloud.config_hash = side.value("config_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed sidecar " + side_path + ": " + e.what());
  }
  return cloud;
}

}  // namespace cadinspect
