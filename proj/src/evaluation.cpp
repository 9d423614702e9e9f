#include "cadinspect/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cadinspect {

ReferenceState reference_state(const TriMesh& nominal, const TriMesh& defective,
                               const Bvh& bvh_defective) {
  if (nominal.empty() || defective.empty()) throw GeometryError("reference_state needs non-empty meshes");
  ReferenceState out;
  out.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nominal.num_faces()));
  out.no_hit.assign(nominal.num_faces(), false);
  for (std::size_t j = 0; j < nominal.num_faces(); ++j) {
    if (nominal.is_degenerate(j)) {
      out.no_hit[j] = true;
      continue;
    }
    const Vec3 c = nominal.face_centroid(j);
    const Vec3& n = nominal.face_normal(j);
    // Slightly negative t_min keeps coincident surfaces (t == 0) from
    // slipping through on rounding.
    const auto up = ray_cast_hit(bvh_defective, defective, c, n, -kHitTieEps);
    const auto down = ray_cast_hit(bvh_defective, defective, c, -n, -kHitTieEps);
    if (up && (!down || up->t <= down->t)) {
      out.x[static_cast<Eigen::Index>(j)] = std::max(up->t, 0.0);
    } else if (down) {
      out.x[static_cast<Eigen::Index>(j)] = -std::max(down->t, 0.0);
    } else {
      out.no_hit[j] = true;
    }
  }
  return out;
}

SelectionMask border_mask(const TriMesh& mesh, double border_m) {
  std::vector<char> vertex_ok(mesh.num_vertices(), 0);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    vertex_ok[i] = mesh.distance_to_boundary(mesh.vertex(i)) >= border_m;
  }
  SelectionMask mask;
  mask.included.assign(mesh.num_faces(), false);
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
    const auto& f = mesh.face(j);
    if (vertex_ok[f[0]] && vertex_ok[f[1]] && vertex_ok[f[2]]) {
      mask.included[j] = true;
      ++mask.n_selected;
    }
  }
  return mask;
}

SelectionMask selection_mask(const TriMesh& mesh, std::span<const std::uint64_t> hit_count,
                             double border_m) {
  SelectionMask mask = border_mask(mesh, border_m);
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
    const bool hit = j < hit_count.size() && hit_count[j] > 0;
    if (mask.included[j] && !hit) {
      mask.included[j] = false;
      --mask.n_selected;
    }
  }
  return mask;
}

double rmse(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& reference, const SelectionMask& mask) {
  if (mask.n_selected == 0) throw Error("rmse: empty face selection");
  double sum = 0.0;
  for (std::size_t j = 0; j < mask.included.size(); ++j) {
    if (!mask.included[j]) continue;
    const double e = x_hat[static_cast<Eigen::Index>(j)] - reference[static_cast<Eigen::Index>(j)];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(mask.n_selected));
}

ErrorStats error_stats(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& reference,
                       const Eigen::VectorXd& diag_P, const SelectionMask& mask) {
  if (mask.n_selected == 0) throw Error("error_stats: empty face selection");
  double sum = 0.0, sum_sq = 0.0, sum_std = 0.0;
  for (std::size_t j = 0; j < mask.included.size(); ++j) {
    if (!mask.included[j]) continue;
    const auto i = static_cast<Eigen::Index>(j);
    const double e = std::abs(x_hat[i] - reference[i]);
    sum += e;
    sum_sq += e * e;
    sum_std += std::sqrt(diag_P[i]);
  }
  const double n = static_cast<double>(mask.n_selected);
  ErrorStats out;
  out.abs_error_mean = sum / n;
  out.abs_error_std = std::sqrt(std::max(0.0, sum_sq / n - out.abs_error_mean * out.abs_error_mean));
  out.posterior_std_mean = sum_std / n;
  return out;
}

std::vector<bool> flag_defects(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& diag_P,
                               double threshold_m, double z_score) {
  std::vector<bool> flags(static_cast<std::size_t>(x_hat.size()), false);
  for (Eigen::Index j = 0; j < x_hat.size(); ++j) {
    const double mag = std::abs(x_hat[j]);
    flags[static_cast<std::size_t>(j)] = mag > threshold_m && mag / std::sqrt(diag_P[j]) > z_score;
  }
  return flags;
}

void export_error_map(const TriMesh& mesh, std::span<const double> values,
                      const std::string& csv_path, const std::string& ply_path) {
  if (values.size() != mesh.num_faces()) throw Error("export_error_map: one value per face required");
  {
    std::ofstream csv(csv_path);
    if (!csv) throw Error("cannot write " + csv_path);
    csv.precision(17);
    csv << "face_index,cx,cy,cz,value\n";
    for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
      const Vec3 c = mesh.face_centroid(j);
      csv << j << ',' << c.x() << ',' << c.y() << ',' << c.z() << ',' << values[j] << '\n';
    }
    if (!csv) throw Error("write failed for " + csv_path);
  }
  if (ply_path.empty()) return;

  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  std::ofstream ply(ply_path);
  if (!ply) throw Error("cannot write " + ply_path);
  ply.precision(17);
  ply << "ply\nformat ascii 1.0\n";
  ply << "element vertex " << mesh.num_vertices() << '\n';
  ply << "property double x\nproperty double y\nproperty double z\n";
  ply << "element face " << mesh.num_faces() << '\n';
  ply << "property list uchar int vertex_indices\n";
  ply << "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const auto& v : mesh.vertices()) ply << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (std::size_t j = 0; j < mesh.num_faces(); ++j) {
    const double s = scale > 0.0 ? std::clamp(values[j] / scale, -1.0, 1.0) : 0.0;
    // Diverging map: negative -> blue, zero -> white, positive -> red.
    const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(s))));
    const int r = s >= 0.0 ? 255 : fade;
    const int b = s <= 0.0 ? 255 : fade;
    const auto& f = mesh.face(j);
    ply << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << ' ' << r << ' ' << fade << ' ' << b << '\n';
  }
  if (!ply) throw Error("write failed for " + ply_path);
}

std::vector<ErrorMapRow> read_error_map(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw ParseError("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line) || line != "face_index,cx,cy,cz,value") {
    throw ParseError("unexpected error-map header in " + csv_path);
  }
  std::vector<ErrorMapRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double fields[5];
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    for (int k = 0; k < 5; ++k) {
      const auto [ptr, ec] = std::from_chars(cur, end, fields[k]);
      if (ec != std::errc()) throw ParseError("bad error-map row: " + line);
      cur = ptr;
      if (k < 4) {
        if (cur == end || *cur != ',') throw ParseError("bad error-map row: " + line);
        ++cur;
      }
    }
    rows.push_back({static_cast<std::uint32_t>(fields[0]), Vec3(fields[1], fields[2], fields[3]), fields[4]});
  }
  return rows;
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["rmse_initial"] = r.rmse_initial;
  j["rmse_trace"] = r.rmse_trace;
  j["final_rmse"] = r.final_rmse();
  j["abs_error_mean"] = r.abs_error_mean;
  j["abs_error_std"] = r.abs_error_std;
  j["posterior_std_mean"] = r.posterior_std_mean;
  j["n_selected"] = r.n_selected;
  j["per_face_error"] = r.per_face_error;
  j["flags"] = r.flags;
  j["selected"] = r.selected;
  j["n_flagged"] = std::count(r.flags.begin(), r.flags.end(), true);
  j["config"] = r.config;
  j["config_hash"] = r.config_hash;
  j["units"] = "metres";
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.rmse_initial = j.at("rmse_initial");
    r.rmse_trace = j.at("rmse_trace").get<std::vector<double>>();
    r.abs_error_mean = j.at("abs_error_mean");
    r.abs_error_std = j.at("abs_error_std");
    r.posterior_std_mean = j.at("posterior_std_mean");
    r.n_selected = j.at("n_selected");
    r.per_face_error = j.at("per_face_error").get<std::vector<double>>();
    r.flags = j.at("flags").get<std::vector<bool>>();
    r.selected = j.at("selected").get<std::vector<bool>>();
    r.config = j.value("config", nlohmann::json::object());
    r.config_hash = j.value("config_hash", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace cadinspect
