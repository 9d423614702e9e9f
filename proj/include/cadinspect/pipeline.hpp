#pragma once

#include "cadinspect/checkpoint.hpp"
#include "cadinspect/estimator.hpp"
#include "cadinspect/evaluation.hpp"
#include "cadinspect/registration.hpp"
#include "cadinspect/sensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cadinspect {

enum class FilterMode { information, covariance };

// Everything that determines a run. Lengths follow the CLI convention
// (millimetres) unless the name says otherwise; the library converts to
// metres internally.
struct RunConfig {
  double tablet_width_mm = 160.0;
  double tablet_height_mm = 100.0;
  double mesh_size_mm = 5.0;
  // Resolution of the defective ground-truth surface the camera sees.
  double truth_mesh_size_mm = 0.5;

  double defect_radius_mm = 5.0;
  double defect_depth_mm = 0.0;  // 0: hemisphere
  bool defect_inward = false;
  // Unset: centroid of the nominal face closest to the tablet centre.
  std::optional<Eigen::Vector2d> defect_center_mm;

  double distance_m = 0.5;
  double heading_deg = 0.0;
  CameraModel camera;

  int n_clouds = 50;
  double sigma0_mm = 50.0;
  double border_mm = 6.0;
  std::uint64_t seed = 1;
  FilterMode mode = FilterMode::information;
  CorrespondencePolicy policy = CorrespondencePolicy::ray_with_fallback;
  std::size_t max_covariance_faces = 2000;

  bool icp = false;
  double pose_noise_mm = 0.0;   // rigid pose error injected before ICP
  double pose_noise_deg = 0.0;

  double flag_threshold_mm = 1.0;
  double flag_z_score = 3.0;

  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
std::string config_hash(const RunConfig& config);

// Nominal CAD tablet, defective ground truth and their acceleration
// structures.
struct Scene {
  TriMesh nominal;
  TriMesh truth;
  Bvh nominal_bvh;
  Bvh truth_bvh;
  SphericalDefect defect;
  std::uint32_t defect_face = 0;  // nominal face containing the defect centre
};

Scene make_scene(const RunConfig& config);

// Camera on a circle of radius distance_m around the tablet centre, tilted
// by heading_deg about the tablet y axis, looking at the centre.
CameraPose camera_pose(const RunConfig& config);

// k-th acquisition (k >= 1). When pose noise is configured, the returned
// cloud carries the perturbed pose while the points come from the true one.
PointCloud acquire_cloud(const Scene& scene, const RunConfig& config, std::uint64_t k);
// Noise seed of the k-th acquisition.
std::uint64_t cloud_seed(const RunConfig& config, std::uint64_t k);
PointCloud acquire_cloud(const TriMesh& truth, const Bvh& truth_bvh, const RunConfig& config,
                         std::uint64_t k);

struct FusionOptions {
  double sigma0_m = 0.05;
  double border_m = 0.006;
  FilterMode mode = FilterMode::information;
  CorrespondencePolicy policy = CorrespondencePolicy::ray_with_fallback;
  bool icp = false;
  IcpOptions icp_options;
  std::size_t max_covariance_faces = 2000;
};

FusionOptions fusion_options(const RunConfig& config);

// Single-writer recursive fusion of clouds into a per-face deviation state.
class FaceDeviationEstimator {
 public:
  FaceDeviationEstimator(const TriMesh& nominal, const Bvh& bvh, FusionOptions options);
  // Resumes from a checkpoint made on the same mesh.
  FaceDeviationEstimator(const TriMesh& nominal, const Bvh& bvh, FusionOptions options,
                         const Checkpoint& resume);

  // Registers (optionally), assembles and fuses one cloud; returns the batch.
  MeasurementBatch ingest(const PointCloud& cloud);
  void ingest_batch(const MeasurementBatch& batch);

  const EstimatorState& state() const { return state_; }
  const std::vector<std::uint64_t>& hit_count() const { return hit_count_; }
  DiagonalRecovery summary() const { return summarize(state_); }
  Checkpoint checkpoint(const std::string& config_hash) const;

 private:
  const TriMesh& nominal_;
  const Bvh& bvh_;
  FusionOptions options_;
  EstimatorState state_;
  std::vector<std::uint64_t> hit_count_;
};

struct EvaluationOptions {
  double border_m = 0.006;
  double flag_threshold_m = 0.001;
  double flag_z_score = 3.0;
};

// Scores a sequence of estimates (k = 1..n) against the reference state. The
// selection uses the final hit counts; with no estimates the border
// criterion alone selects faces so the prior can still be scored.
EvalReport evaluate_trace(const TriMesh& nominal, const Eigen::VectorXd& reference,
                          const std::vector<DiagonalRecovery>& trace, double sigma0_m,
                          std::span<const std::uint64_t> hit_count,
                          const EvaluationOptions& options);

// Artifact consistency. Meshes written by a configured run carry
// "cfg:<hash>" in their STL header.
std::string stl_header_for(const std::string& config_hash);
std::string config_hash_of_stl(const std::string& path);  // empty when absent
// Throws ConsistencyError when a non-empty artifact hash differs from the
// expected one.
void require_config_hash(const std::string& artifact_hash, const std::string& expected,
                         const std::string& what);
// Regular files in dir with the given extension, sorted by name.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& ext);

struct EstimateOutput {
  std::vector<DiagonalRecovery> trace;  // after each cloud
  std::vector<std::uint64_t> hit_count;
  Checkpoint final_checkpoint;
  std::size_t points_used = 0;
  std::size_t points_dropped = 0;
};

// Fuses next(1) .. next(n_clouds). With checkpoint_dir set, writes
// ckpt_NNNN.json after every cloud.
EstimateOutput estimate_stage(const TriMesh& nominal, const Bvh& nominal_bvh, const RunConfig& config,
                              int n_clouds, const std::function<PointCloud(int)>& next,
                              const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

EvalReport evaluate_stage(const TriMesh& nominal, const TriMesh& truth, const Bvh& truth_bvh,
                          const RunConfig& config, const std::vector<DiagonalRecovery>& trace,
                          std::span<const std::uint64_t> hit_count);

// Writes the report to report_path and rmse.csv, error_map.{csv,ply} next
// to it.
void write_report_artifacts(const std::filesystem::path& report_path, const TriMesh& nominal,
                            const EvalReport& report, const Eigen::VectorXd& estimate);

struct PipelineResult {
  EvalReport report;
  Eigen::VectorXd reference;
  DiagonalRecovery final_estimate;
  std::vector<std::uint64_t> hit_count;
  std::uint32_t defect_face = 0;
  std::size_t n_faces = 0;
  std::size_t points_used = 0;
  std::size_t points_dropped = 0;
};

// Generates meshes, simulates n_clouds acquisitions, fuses them and scores
// the result. With out_dir set, writes meshes/, clouds/, checkpoints/,
// config.json, report.json, rmse.csv and error_map.{csv,ply}.
PipelineResult run_pipeline(const RunConfig& config,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

enum class SweepAxis { distance, heading, seed };

struct SweepRow {
  double value = 0.0;
  double final_rmse = 0.0;
  double abs_error_mean = 0.0;
  double abs_error_std = 0.0;
  double posterior_std_mean = 0.0;
  std::vector<double> rmse_trace;
};

struct QuartileRow {
  int iteration = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::distance;
  std::vector<SweepRow> rows;
  std::vector<QuartileRow> quartiles;  // seed sweeps only
};

SweepResult run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values);

// <axis>,final_rmse_mm,abs_error_mean_mm,abs_error_std_mm,posterior_std_mean_mm with the
// axis column distance_mm, heading_deg or seed.
std::string sweep_table_csv(const SweepResult& result);
// iteration,statistic,rmse_mm with statistic in {q1, median, q3}
std::string quartile_table_csv(const SweepResult& result);

// Linear-interpolated quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace cadinspect
