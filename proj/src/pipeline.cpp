#include "cadinspect/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace cadinspect {
namespace {

constexpr double kMm = 1e-3;
constexpr double kDeg = 3.14159265358979323846 / 180.0;

std::string mode_name(FilterMode m) { return m == FilterMode::information ? "info" : "covariance"; }

FilterMode parse_mode(const std::string& s) {
  if (s == "info" || s == "information") return FilterMode::information;
  if (s == "covariance") return FilterMode::covariance;
  throw Error("unknown filter mode '" + s + "' (expected info|covariance)");
}

std::string policy_name(CorrespondencePolicy p) {
  switch (p) {
    case CorrespondencePolicy::ray_with_fallback: return "ray_with_fallback";
    case CorrespondencePolicy::ray_only: return "ray_only";
    case CorrespondencePolicy::closest_point_only: return "closest_point";
  }
  return "ray_with_fallback";
}

CorrespondencePolicy parse_policy(const std::string& s) {
  if (s == "ray_with_fallback") return CorrespondencePolicy::ray_with_fallback;
  if (s == "ray_only") return CorrespondencePolicy::ray_only;
  if (s == "closest_point") return CorrespondencePolicy::closest_point_only;
  throw Error("unknown correspondence policy '" + s + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k, std::uint64_t salt) {
  Fnv1a h;
  h.add(seed);
  h.add(k);
  h.add(salt);
  return h.value();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void RunConfig::validate() const {
  if (!(tablet_width_mm > 0.0 && tablet_height_mm > 0.0)) throw Error("tablet dimensions must be positive");
  if (!(mesh_size_mm > 0.0 && truth_mesh_size_mm > 0.0)) throw Error("mesh sizes must be positive");
  if (!(defect_radius_mm > 0.0)) throw Error("defect radius must be positive");
  if (!(distance_m > 0.0)) throw Error("camera distance must be positive");
  if (n_clouds < 0) throw Error("n_clouds must be non-negative");
  if (!(sigma0_mm > 0.0)) throw Error("sigma0 must be positive");
  if (!(border_mm >= 0.0)) throw Error("border must be non-negative");
  camera.validate();
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["tablet_width_mm"] = c.tablet_width_mm;
  j["tablet_height_mm"] = c.tablet_height_mm;
  j["mesh_size_mm"] = c.mesh_size_mm;
  j["truth_mesh_size_mm"] = c.truth_mesh_size_mm;
  j["defect_radius_mm"] = c.defect_radius_mm;
  j["defect_depth_mm"] = c.defect_depth_mm;
  j["defect_inward"] = c.defect_inward;
  if (c.defect_center_mm) {
    j["defect_center_mm"] = {c.defect_center_mm->x(), c.defect_center_mm->y()};
  } else {
    j["defect_center_mm"] = nullptr;
  }
  j["distance_m"] = c.distance_m;
  j["heading_deg"] = c.heading_deg;
  j["camera"] = {{"a", c.camera.a},
                 {"b", c.camera.b},
                 {"hfov_deg", c.camera.hfov_rad / kDeg},
                 {"vfov_deg", c.camera.vfov_rad / kDeg},
                 {"width_px", c.camera.width_px},
                 {"height_px", c.camera.height_px},
                 {"min_range_m", c.camera.min_range_m},
                 {"max_range_m", c.camera.max_range_m},
                 {"stride", c.camera.stride}};
  j["n_clouds"] = c.n_clouds;
  j["sigma0_mm"] = c.sigma0_mm;
  j["border_mm"] = c.border_mm;
  j["seed"] = c.seed;
  j["mode"] = mode_name(c.mode);
  j["correspondence"] = policy_name(c.policy);
  j["max_covariance_faces"] = c.max_covariance_faces;
  j["icp"] = c.icp;
  j["pose_noise_mm"] = c.pose_noise_mm;
  j["pose_noise_deg"] = c.pose_noise_deg;
  j["flag_threshold_mm"] = c.flag_threshold_mm;
  j["flag_z_score"] = c.flag_z_score;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  const nlohmann::json defaults = config_to_json(c);
  try {
    for (const auto& [key, value] : j.items()) {
      if (!defaults.contains(key)) throw Error("unknown config key '" + key + "'");
      if (key == "camera") {
        for (const auto& [ck, cv] : value.items()) {
          if (!defaults["camera"].contains(ck)) throw Error("unknown camera key '" + ck + "'");
        }
      }
    }
    c.tablet_width_mm = j.value("tablet_width_mm", c.tablet_width_mm);
    c.tablet_height_mm = j.value("tablet_height_mm", c.tablet_height_mm);
    c.mesh_size_mm = j.value("mesh_size_mm", c.mesh_size_mm);
    c.truth_mesh_size_mm = j.value("truth_mesh_size_mm", c.truth_mesh_size_mm);
    c.defect_radius_mm = j.value("defect_radius_mm", c.defect_radius_mm);
    c.defect_depth_mm = j.value("defect_depth_mm", c.defect_depth_mm);
    c.defect_inward = j.value("defect_inward", c.defect_inward);
    if (j.contains("defect_center_mm") && !j["defect_center_mm"].is_null()) {
      const auto& v = j["defect_center_mm"];
      c.defect_center_mm = Eigen::Vector2d(v.at(0).get<double>(), v.at(1).get<double>());
    }
    c.distance_m = j.value("distance_m", c.distance_m);
    c.heading_deg = j.value("heading_deg", c.heading_deg);
    if (j.contains("camera")) {
      const auto& cam = j["camera"];
      c.camera.a = cam.value("a", c.camera.a);
      c.camera.b = cam.value("b", c.camera.b);
      c.camera.hfov_rad = cam.value("hfov_deg", c.camera.hfov_rad / kDeg) * kDeg;
      c.camera.vfov_rad = cam.value("vfov_deg", c.camera.vfov_rad / kDeg) * kDeg;
      c.camera.width_px = cam.value("width_px", c.camera.width_px);
      c.camera.height_px = cam.value("height_px", c.camera.height_px);
      c.camera.min_range_m = cam.value("min_range_m", c.camera.min_range_m);
      c.camera.max_range_m = cam.value("max_range_m", c.camera.max_range_m);
      c.camera.stride = cam.value("stride", c.camera.stride);
    }
    c.n_clouds = j.value("n_clouds", c.n_clouds);
    c.sigma0_mm = j.value("sigma0_mm", c.sigma0_mm);
    c.border_mm = j.value("border_mm", c.border_mm);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    if (j.contains("correspondence")) c.policy = parse_policy(j["correspondence"].get<std::string>());
    c.max_covariance_faces = j.value("max_covariance_faces", c.max_covariance_faces);
    c.icp = j.value("icp", c.icp);
    c.pose_noise_mm = j.value("pose_noise_mm", c.pose_noise_mm);
    c.pose_noise_deg = j.value("pose_noise_deg", c.pose_noise_deg);
    c.flag_threshold_mm = j.value("flag_threshold_mm", c.flag_threshold_mm);
    c.flag_z_score = j.value("flag_z_score", c.flag_z_score);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const RunConfig& config) {
  Fnv1a h;
  h.add(config_to_json(config).dump());
  return to_hex(h.value());
}

Scene make_scene(const RunConfig& config) {
  config.validate();
  const double w = config.tablet_width_mm * kMm;
  const double h = config.tablet_height_mm * kMm;
  TriMesh nominal = generate_tablet(w, h, config.mesh_size_mm * kMm);

  std::uint32_t center_face = 0;
  Eigen::Vector2d center;
  if (config.defect_center_mm) {
    center = *config.defect_center_mm * kMm;
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nominal.num_faces(); ++j) {
      const double d = nominal.face_centroid(j).head<2>().norm();
      if (d < best - 1e-15) {
        best = d;
        center_face = static_cast<std::uint32_t>(j);
      }
    }
    center = nominal.face_centroid(center_face).head<2>();
  }
  // Face whose planar triangle contains the centre (lowest index on ties).
  if (config.defect_center_mm) {
    const Vec3 c3(center.x(), center.y(), 0.0);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nominal.num_faces(); ++j) {
      const auto corners = nominal.face_corners(j);
      const double d = (closest_point_on_triangle(c3, corners[0], corners[1], corners[2]) - c3).norm();
      if (d < best - 1e-15) {
        best = d;
        center_face = static_cast<std::uint32_t>(j);
      }
    }
  }

  SphericalDefect defect;
  defect.center_xy = center;
  defect.sphere_radius_m = config.defect_radius_mm * kMm;
  defect.center_depth_m = config.defect_depth_mm * kMm;
  defect.protrusion = config.defect_inward ? Protrusion::inward : Protrusion::outward;
  TriMesh truth = add_spherical_defect(generate_tablet(w, h, config.truth_mesh_size_mm * kMm), defect);

  Bvh nominal_bvh(nominal);
  Bvh truth_bvh(truth);
  return Scene{std::move(nominal), std::move(truth), std::move(nominal_bvh), std::move(truth_bvh),
               defect, center_face};
}

CameraPose camera_pose(const RunConfig& config) {
  const double heading = config.heading_deg * kDeg;
  const Vec3 position(config.distance_m * std::sin(heading), 0.0, config.distance_m * std::cos(heading));
  return look_at(position, Vec3::Zero(), Vec3::UnitY());
}

PointCloud acquire_cloud(const Scene& scene, const RunConfig& config, std::uint64_t k) {
  return acquire_cloud(scene.truth, scene.truth_bvh, config, k);
}

std::uint64_t cloud_seed(const RunConfig& config, std::uint64_t k) { return derive_seed(config.seed, k, 1); }

PointCloud acquire_cloud(const TriMesh& truth, const Bvh& truth_bvh, const RunConfig& config,
                         std::uint64_t k) {
  const CameraPose truth_pose = camera_pose(config);
  PointCloud cloud =
      simulate_cloud(truth, truth_bvh, truth_pose, config.camera, cloud_seed(config, k));
  cloud.seq = k;
  cloud.config_hash = config_hash(config);
  if (config.pose_noise_mm > 0.0 || config.pose_noise_deg > 0.0) {
    std::mt19937_64 rng(derive_seed(config.seed, k, 2));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Vec3 dir = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    const Vec3 axis = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
    // Rotation about the tablet centre so the error stays near the view.
    const auto error = RigidTransform::from_axis_angle(axis, config.pose_noise_deg * kDeg,
                                                       config.pose_noise_mm * kMm * dir);
    cloud.pose.position = error.apply(truth_pose.position);
    cloud.pose.orientation = (Eigen::Quaterniond(error.rotation) * truth_pose.orientation).normalized();
  }
  return cloud;
}

FusionOptions fusion_options(const RunConfig& config) {
  FusionOptions o;
  o.sigma0_m = config.sigma0_mm * kMm;
  o.border_m = config.border_mm * kMm;
  o.mode = config.mode;
  o.policy = config.policy;
  o.icp = config.icp;
  o.max_covariance_faces = config.max_covariance_faces;
  return o;
}

FaceDeviationEstimator::FaceDeviationEstimator(const TriMesh& nominal, const Bvh& bvh,
                                               FusionOptions options)
    : nominal_(nominal), bvh_(bvh), options_(options), hit_count_(nominal.num_faces(), 0) {
  if (bvh.mesh_fingerprint() != nominal.fingerprint()) {
    throw ConsistencyError("BVH was built for a different mesh");
  }
  const auto fp = nominal.fingerprint();
  if (options_.mode == FilterMode::covariance) {
    if (nominal.num_faces() > options_.max_covariance_faces) {
      throw Error("covariance-form filter limited to " + std::to_string(options_.max_covariance_faces) +
                  " faces; mesh has " + std::to_string(nominal.num_faces()));
    }
    state_ = covariance_prior(nominal.num_faces(), options_.sigma0_m, fp);
  } else {
    state_ = information_prior(nominal.num_faces(), options_.sigma0_m, fp);
  }
}

FaceDeviationEstimator::FaceDeviationEstimator(const TriMesh& nominal, const Bvh& bvh,
                                               FusionOptions options, const Checkpoint& resume)
    : FaceDeviationEstimator(nominal, bvh, options) {
  if (fingerprint_of(resume.state) != nominal.fingerprint()) {
    throw ConsistencyError("checkpoint was produced on a different mesh");
  }
  const bool is_cov = std::holds_alternative<CovarianceState>(resume.state);
  if (is_cov != (options_.mode == FilterMode::covariance)) {
    throw ConsistencyError("checkpoint representation does not match the filter mode");
  }
  if (is_cov && !resume.covariance_complete) {
    throw ConsistencyError("checkpoint holds only diag(P) and cannot be resumed");
  }
  state_ = resume.state;
  if (resume.hit_count.size() == hit_count_.size()) hit_count_ = resume.hit_count;
}

void FaceDeviationEstimator::ingest_batch(const MeasurementBatch& batch) {
  if (auto* cov = std::get_if<CovarianceState>(&state_)) {
    *cov = rwls_update(*cov, batch);
  } else {
    auto& info = std::get<InformationState>(state_);
    info = info_update(info, batch);
  }
  for (auto f : batch.face_of) ++hit_count_[f];
}

MeasurementBatch FaceDeviationEstimator::ingest(const PointCloud& cloud) {
  AssembleOptions assemble;
  assemble.border_exclusion_m = options_.border_m;
  assemble.policy = options_.policy;
  if (options_.icp && !cloud.points.empty()) {
    assemble.correction = icp_align(cloud, nominal_, bvh_, RigidTransform::identity(), options_.icp_options).transform;
  }
  MeasurementBatch batch = assemble_batch(cloud, nominal_, bvh_, assemble);
  ingest_batch(batch);
  return batch;
}

Checkpoint FaceDeviationEstimator::checkpoint(const std::string& config_hash) const {
  return Checkpoint{state_, hit_count_, config_hash, true};
}

EvalReport evaluate_trace(const TriMesh& nominal, const Eigen::VectorXd& reference,
                          const std::vector<DiagonalRecovery>& trace, double sigma0_m,
                          std::span<const std::uint64_t> hit_count,
                          const EvaluationOptions& options) {
  const auto n = static_cast<Eigen::Index>(nominal.num_faces());
  const SelectionMask mask = trace.empty() ? border_mask(nominal, options.border_m)
                                           : selection_mask(nominal, hit_count, options.border_m);
  EvalReport report;
  report.n_selected = mask.n_selected;
  report.selected = mask.included;
  if (mask.n_selected == 0) throw Error("evaluation: no faces selected");
  const Eigen::VectorXd prior = Eigen::VectorXd::Zero(n);
  report.rmse_initial = rmse(prior, reference, mask);
  for (const auto& est : trace) report.rmse_trace.push_back(rmse(est.x_hat, reference, mask));

  const DiagonalRecovery last =
      trace.empty() ? DiagonalRecovery{prior, Eigen::VectorXd::Constant(n, sigma0_m * sigma0_m)} : trace.back();
  const ErrorStats stats = error_stats(last.x_hat, reference, last.diag_P, mask);
  report.abs_error_mean = stats.abs_error_mean;
  report.abs_error_std = stats.abs_error_std;
  report.posterior_std_mean = stats.posterior_std_mean;
  const Eigen::VectorXd err = last.x_hat - reference;
  report.per_face_error.assign(err.data(), err.data() + err.size());
  report.flags = flag_defects(last.x_hat, last.diag_P, options.flag_threshold_m, options.flag_z_score);
  return report;
}

std::string stl_header_for(const std::string& config_hash) { return "cfg:" + config_hash; }

std::string config_hash_of_stl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::string head(512, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const std::string header = stl_header(head);
  if (header.rfind("cfg:", 0) != 0) return {};
  return header.substr(4, header.find_first_of(" \t\r\n", 4) - 4);
}

void require_config_hash(const std::string& artifact_hash, const std::string& expected,
                         const std::string& what) {
  if (!artifact_hash.empty() && artifact_hash != expected) {
    throw ConsistencyError(what + " was produced under config " + artifact_hash + ", current config is " +
                           expected);
  }
}

std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir, const std::string& ext) {
  if (!std::filesystem::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

EstimateOutput estimate_stage(const TriMesh& nominal, const Bvh& nominal_bvh, const RunConfig& config,
                              int n_clouds, const std::function<PointCloud(int)>& next,
                              const std::optional<std::filesystem::path>& checkpoint_dir) {
  const std::string hash = config_hash(config);
  if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);
  FaceDeviationEstimator estimator(nominal, nominal_bvh, fusion_options(config));
  EstimateOutput out;
  for (int k = 1; k <= n_clouds; ++k) {
    const PointCloud cloud = next(k);
    require_config_hash(cloud.config_hash, hash, "cloud " + std::to_string(k));
    const MeasurementBatch batch = estimator.ingest(cloud);
    out.points_used += batch.size();
    out.points_dropped += batch.dropped_border + batch.dropped_no_correspondence;
    out.trace.push_back(estimator.summary());
    if (checkpoint_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%04d.json", k);
      // Full covariance matrices only for small meshes or the last cloud.
      const bool full = nominal.num_faces() <= 500 || k == n_clouds;
      write_checkpoint(estimator.checkpoint(hash), (*checkpoint_dir / name).string(), full);
    }
  }
  out.hit_count = estimator.hit_count();
  out.final_checkpoint = estimator.checkpoint(hash);
  return out;
}

EvalReport evaluate_stage(const TriMesh& nominal, const TriMesh& truth, const Bvh& truth_bvh,
                          const RunConfig& config, const std::vector<DiagonalRecovery>& trace,
                          std::span<const std::uint64_t> hit_count) {
  const ReferenceState ref = reference_state(nominal, truth, truth_bvh);
  EvaluationOptions eval;
  eval.border_m = config.border_mm * kMm;
  eval.flag_threshold_m = config.flag_threshold_mm * kMm;
  eval.flag_z_score = config.flag_z_score;
  EvalReport report = evaluate_trace(nominal, ref.x, trace, config.sigma0_mm * kMm, hit_count, eval);
  report.config = config_to_json(config);
  report.config_hash = config_hash(config);
  return report;
}

void write_report_artifacts(const std::filesystem::path& report_path, const TriMesh& nominal,
                            const EvalReport& report, const Eigen::VectorXd& estimate) {
  const std::filesystem::path dir = report_path.parent_path().empty() ? "." : report_path.parent_path();
  std::filesystem::create_directories(dir);
  write_text(report_path, report_to_json(report).dump(2) + "\n");
  std::ostringstream csv;
  csv.precision(17);
  csv << "k,rmse_m\n0," << report.rmse_initial << '\n';
  for (std::size_t k = 0; k < report.rmse_trace.size(); ++k) {
    csv << k + 1 << ',' << report.rmse_trace[k] << '\n';
  }
  write_text(dir / "rmse.csv", csv.str());
  export_error_map(nominal, std::span<const double>(estimate.data(), static_cast<std::size_t>(estimate.size())),
                   (dir / "error_map.csv").string(), (dir / "error_map.ply").string());
}

PipelineResult run_pipeline(const RunConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  namespace fs = std::filesystem;
  config.validate();
  const Scene scene = make_scene(config);
  const std::string hash = config_hash(config);

  std::optional<fs::path> checkpoint_dir;
  if (out_dir) {
    fs::create_directories(*out_dir / "meshes");
    fs::create_directories(*out_dir / "clouds");
    checkpoint_dir = *out_dir / "checkpoints";
    write_text(*out_dir / "config.json", config_to_json(config).dump(2) + "\n");
    write_stl_file(scene.nominal, (*out_dir / "meshes" / "nominal.stl").string(), StlFormat::ascii,
                   stl_header_for(hash));
    write_stl_file(scene.truth, (*out_dir / "meshes" / "truth.stl").string(), StlFormat::ascii,
                   stl_header_for(hash));
  }

  auto next = [&](int k) {
    PointCloud cloud = acquire_cloud(scene, config, static_cast<std::uint64_t>(k));
    if (out_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "cloud_%04d.ply", k);
      write_cloud(cloud, (*out_dir / "clouds" / name).string());
    }
    return cloud;
  };
  EstimateOutput est = estimate_stage(scene.nominal, scene.nominal_bvh, config, config.n_clouds, next,
                                      checkpoint_dir);

  PipelineResult result;
  result.report = evaluate_stage(scene.nominal, scene.truth, scene.truth_bvh, config, est.trace, est.hit_count);
  result.reference = reference_state(scene.nominal, scene.truth, scene.truth_bvh).x;
  result.final_estimate = summarize(est.final_checkpoint.state);
  result.hit_count = std::move(est.hit_count);
  result.defect_face = scene.defect_face;
  result.n_faces = scene.nominal.num_faces();
  result.points_used = est.points_used;
  result.points_dropped = est.points_dropped;
  if (out_dir) write_report_artifacts(*out_dir / "report.json", scene.nominal, result.report, result.final_estimate.x_hat);
  return result;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

SweepResult run_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values) {
  SweepResult out;
  out.axis = axis;
  for (double v : values) {
    RunConfig c = config;
    switch (axis) {
      case SweepAxis::distance: c.distance_m = v; break;
      case SweepAxis::heading: c.heading_deg = v; break;
      case SweepAxis::seed: c.seed = static_cast<std::uint64_t>(v); break;
    }
    const PipelineResult r = run_pipeline(c);
    SweepRow row;
    row.value = v;
    row.final_rmse = r.report.final_rmse();
    row.abs_error_mean = r.report.abs_error_mean;
    row.abs_error_std = r.report.abs_error_std;
    row.posterior_std_mean = r.report.posterior_std_mean;
    row.rmse_trace = r.report.rmse_trace;
    out.rows.push_back(std::move(row));
  }
  if (axis == SweepAxis::seed && !out.rows.empty()) {
    const std::size_t len = out.rows.front().rmse_trace.size();
    for (std::size_t k = 0; k < len; ++k) {
      std::vector<double> at_k;
      for (const auto& row : out.rows) at_k.push_back(row.rmse_trace[k]);
      out.quartiles.push_back({static_cast<int>(k + 1), quantile(at_k, 0.25), quantile(at_k, 0.5),
                               quantile(at_k, 0.75)});
    }
  }
  return out;
}

std::string sweep_table_csv(const SweepResult& result) {
  std::ostringstream os;
  os.precision(10);
  const char* column = result.axis == SweepAxis::distance ? "distance_mm"
                       : result.axis == SweepAxis::heading ? "heading_deg"
                                                           : "seed";
  os << column << ",final_rmse_mm,abs_error_mean_mm,abs_error_std_mm,posterior_std_mean_mm\n";
  for (const auto& r : result.rows) {
    os << (result.axis == SweepAxis::distance ? r.value / kMm : r.value) << ',' << r.final_rmse / kMm << ',' << r.abs_error_mean / kMm << ','
       << r.abs_error_std / kMm << ',' << r.posterior_std_mean / kMm << '\n';
  }
  return os.str();
}

std::string quartile_table_csv(const SweepResult& result) {
  std::ostringstream os;
  os.precision(10);
  os << "iteration,statistic,rmse_mm\n";
  for (const auto& q : result.quartiles) {
    os << q.iteration << ",q1," << q.q1 / kMm << '\n';
    os << q.iteration << ",median," << q.median / kMm << '\n';
    os << q.iteration << ",q3," << q.q3 / kMm << '\n';
  }
  return os.str();
}

}  // namespace cadinspect
