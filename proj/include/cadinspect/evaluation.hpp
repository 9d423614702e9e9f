#pragma once

#include "cadinspect/raycast.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace cadinspect {

struct ReferenceState {
  Eigen::VectorXd x;          // signed deviation per nominal face, metres
  std::vector<bool> no_hit;   // true where neither normal sense hit the defective mesh
};

// Deviation of each nominal face: the nearer of the rays from the face
// centroid along +n and -n onto the defective mesh, signed along +n. Faces
// without a hit get 0 and are flagged.
ReferenceState reference_state(const TriMesh& nominal, const TriMesh& defective,
                               const Bvh& bvh_defective);

struct SelectionMask {
  std::vector<bool> included;
  std::size_t n_selected = 0;
};

// A face is selected when it collected at least one measurement and all
// three of its vertices lie at least border_m from the mesh boundary.
SelectionMask selection_mask(const TriMesh& mesh, std::span<const std::uint64_t> hit_count,
                             double border_m);

// Border criterion only, as if every face had been observed.
SelectionMask border_mask(const TriMesh& mesh, double border_m);

// sqrt(e^T e / n_selected) over selected faces. Throws Error on an empty
// selection.
double rmse(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& reference,
            const SelectionMask& mask);

struct ErrorStats {
  double abs_error_mean = 0.0;
  double abs_error_std = 0.0;  // population standard deviation of |e|
  double posterior_std_mean = 0.0;
};

ErrorStats error_stats(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& reference,
                       const Eigen::VectorXd& diag_P, const SelectionMask& mask);

// |x_j| > threshold and |x_j| / sqrt(P_jj) > z_score.
std::vector<bool> flag_defects(const Eigen::VectorXd& x_hat, const Eigen::VectorXd& diag_P,
                               double threshold_m, double z_score);

// Writes face_index,cx,cy,cz,value rows to csv_path and, when ply_path is not
// empty, an ASCII PLY with one colour per face (blue-white-red over
// [-max|v|, max|v|]).
void export_error_map(const TriMesh& mesh, std::span<const double> values,
                      const std::string& csv_path, const std::string& ply_path = {});

struct ErrorMapRow {
  std::uint32_t face_index = 0;
  Vec3 centroid = Vec3::Zero();
  double value = 0.0;
};

std::vector<ErrorMapRow> read_error_map(const std::string& csv_path);

struct EvalReport {
  double rmse_initial = 0.0;         // prior estimate (k = 0)
  std::vector<double> rmse_trace;    // k = 1..n_clouds
  double abs_error_mean = 0.0;
  double abs_error_std = 0.0;
  double posterior_std_mean = 0.0;
  std::size_t n_selected = 0;
  std::vector<double> per_face_error;
  std::vector<bool> flags;
  std::vector<bool> selected;
  nlohmann::json config;             // echoed verbatim
  std::string config_hash;

  double final_rmse() const { return rmse_trace.empty() ? rmse_initial : rmse_trace.back(); }
};

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace cadinspect
