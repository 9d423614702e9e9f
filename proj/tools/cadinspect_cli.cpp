// cadinspect: tablet generation, cloud simulation, estimation, evaluation
// and sweeps. Lengths on the command line are millimetres.

#include "cadinspect/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cadinspect;

namespace {

constexpr double kMm = 1e-3;

// Flags that override fields of the run configuration. Unset flags keep the
// value from --config (or the default).
struct ConfigFlags {
  std::string config_path;
  std::optional<double> width_mm, height_mm, mesh_mm, truth_mesh_mm;
  std::optional<double> defect_radius_mm, defect_depth_mm;
  std::optional<std::vector<double>> defect_center_mm;
  std::optional<bool> defect_inward;
  std::optional<double> distance_mm, heading_deg;
  std::optional<int> stride, n_clouds;
  std::optional<double> sigma0_mm, border_mm;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode, icp, correspondence;
  std::optional<double> pose_noise_mm, pose_noise_deg;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--width-mm", width_mm, "tablet width (160)");
    app->add_option("--height-mm", height_mm, "tablet height (100)");
    app->add_option("--mesh-mm", mesh_mm, "nominal mesh size (5)");
    app->add_option("--truth-mesh-mm", truth_mesh_mm, "ground-truth mesh size (0.5)");
    app->add_option("--defect-radius-mm", defect_radius_mm, "defect sphere radius (5)");
    app->add_option("--defect-depth-mm", defect_depth_mm, "sphere centre below the surface (0)");
    app->add_option("--defect-center-mm", defect_center_mm, "defect centre x y")->expected(2);
    app->add_option("--defect-inward", defect_inward, "dent instead of bump (false)");
    app->add_option("--distance-mm", distance_mm, "camera distance (500)");
    app->add_option("--heading-deg", heading_deg, "camera heading about the tablet y axis (0)");
    app->add_option("--stride", stride, "pixel stride (1)");
    app->add_option("--n-clouds", n_clouds, "number of acquisitions (50)");
    app->add_option("--sigma0-mm", sigma0_mm, "prior standard deviation (50)");
    app->add_option("--border-mm", border_mm, "border exclusion (6)");
    app->add_option("--seed", seed, "base seed (1)");
    app->add_option("--mode", mode, "info|covariance (info)")->check(CLI::IsMember({"info", "covariance"}));
    app->add_option("--icp", icp, "on|off (off)")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--correspondence", correspondence, "ray_with_fallback|ray_only|closest_point")
        ->check(CLI::IsMember({"ray_with_fallback", "ray_only", "closest_point"}));
    app->add_option("--pose-noise-mm", pose_noise_mm, "injected pose translation error (0)");
    app->add_option("--pose-noise-deg", pose_noise_deg, "injected pose rotation error (0)");
  }

  RunConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(config_path + ": " + e.what());
      }
    }
    RunConfig c = config_from_json(j);
    if (width_mm) c.tablet_width_mm = *width_mm;
    if (height_mm) c.tablet_height_mm = *height_mm;
    if (mesh_mm) c.mesh_size_mm = *mesh_mm;
    if (truth_mesh_mm) c.truth_mesh_size_mm = *truth_mesh_mm;
    if (defect_radius_mm) c.defect_radius_mm = *defect_radius_mm;
    if (defect_depth_mm) c.defect_depth_mm = *defect_depth_mm;
    if (defect_center_mm) c.defect_center_mm = Eigen::Vector2d((*defect_center_mm)[0], (*defect_center_mm)[1]);
    if (defect_inward) c.defect_inward = *defect_inward;
    if (distance_mm) c.distance_m = *distance_mm * kMm;
    if (heading_deg) c.heading_deg = *heading_deg;
    if (stride) c.camera.stride = *stride;
    if (n_clouds) c.n_clouds = *n_clouds;
    if (sigma0_mm) c.sigma0_mm = *sigma0_mm;
    if (border_mm) c.border_mm = *border_mm;
    if (seed) c.seed = *seed;
    if (pose_noise_mm) c.pose_noise_mm = *pose_noise_mm;
    if (pose_noise_deg) c.pose_noise_deg = *pose_noise_deg;
    // Round-trip through JSON so enum-valued flags share the config parser.
    nlohmann::json merged = config_to_json(c);
    if (mode) merged["mode"] = *mode;
    if (icp) merged["icp"] = *icp == "on";
    if (correspondence) merged["correspondence"] = *correspondence;
    return config_from_json(merged);
  }
};

TriMesh load_mesh(const std::string& path, const std::string& hash, const std::string& what) {
  require_config_hash(config_hash_of_stl(path), hash, what + " " + path);
  return read_stl_file(path);
}

CameraPose read_pose(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    CameraPose pose;
    const auto& p = j.at("position");
    pose.position = Vec3(p.at(0), p.at(1), p.at(2));
    const auto& q = j.at("quaternion");
    pose.orientation = Eigen::Quaterniond(q.at(0), q.at(1), q.at(2), q.at(3)).normalized();
    return pose;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void print_report(const EvalReport& r) {
  std::printf("faces selected      %zu\n", r.n_selected);
  std::printf("rmse initial        %.4f mm\n", r.rmse_initial / kMm);
  std::printf("rmse final          %.4f mm\n", r.final_rmse() / kMm);
  std::printf("|error| mean        %.4f mm\n", r.abs_error_mean / kMm);
  std::printf("|error| std         %.4f mm\n", r.abs_error_std / kMm);
  std::printf("posterior std mean  %.4f mm\n", r.posterior_std_mean / kMm);
  std::printf("flagged faces       %zu\n",
              static_cast<std::size_t>(std::count(r.flags.begin(), r.flags.end(), true)));
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-face CAD deviation estimation from simulated depth-camera clouds"};
  app.require_subcommand(1);

  // tablet
  ConfigFlags tablet_flags;
  std::string tablet_out = ".";
  std::string tablet_format = "ascii";
  auto* tablet = app.add_subcommand("tablet", "write nominal.stl and truth.stl");
  tablet_flags.attach(tablet);
  tablet->add_option("--out", tablet_out, "output directory");
  tablet->add_option("--format", tablet_format, "ascii|binary")->check(CLI::IsMember({"ascii", "binary"}));

  // simulate
  ConfigFlags sim_flags;
  std::string sim_mesh, sim_pose, sim_out;
  int sim_first = 1;
  std::optional<int> sim_count;
  auto* simulate = app.add_subcommand("simulate", "simulate clouds of a ground-truth mesh");
  sim_flags.attach(simulate);
  simulate->add_option("--mesh", sim_mesh, "ground-truth STL")->required()->check(CLI::ExistingFile);
  simulate->add_option("--pose", sim_pose, "JSON {position, quaternion[w,x,y,z]} camera-to-world")
      ->check(CLI::ExistingFile);
  simulate->add_option("--first", sim_first, "index of the first acquisition (1)");
  simulate->add_option("--count", sim_count, "number of clouds (n_clouds)");
  simulate->add_option("--out", sim_out, "output directory")->required();

  // estimate
  ConfigFlags est_flags;
  std::string est_mesh, est_clouds, est_out;
  auto* estimate = app.add_subcommand("estimate", "fuse a directory of clouds");
  est_flags.attach(estimate);
  estimate->add_option("--mesh", est_mesh, "nominal STL")->required()->check(CLI::ExistingFile);
  estimate->add_option("--clouds", est_clouds, "directory of cloud_NNNN.ply")->required()->check(CLI::ExistingDirectory);
  estimate->add_option("--out", est_out, "output directory for checkpoints")->required();

  // evaluate
  ConfigFlags eval_flags;
  std::string eval_state, eval_truth, eval_nominal, eval_out = "report.json";
  auto* evaluate = app.add_subcommand("evaluate", "score checkpoints against the ground truth");
  eval_flags.attach(evaluate);
  evaluate->add_option("--state", eval_state, "checkpoint file or directory")->required()->check(CLI::ExistingPath);
  evaluate->add_option("--truth-mesh", eval_truth, "ground-truth STL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--nominal-mesh", eval_nominal, "nominal STL")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "report path; rmse.csv and error_map.* go next to it");

  // pipeline
  ConfigFlags pipe_flags;
  std::string pipe_out;
  auto* pipeline = app.add_subcommand("pipeline", "generate, simulate, estimate and evaluate");
  pipe_flags.attach(pipeline);
  pipeline->add_option("--out", pipe_out, "run directory (nothing written when omitted)");

  // sweep
  ConfigFlags sweep_flags;
  std::string sweep_axis, sweep_out;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "run the pipeline over distances, headings or seeds");
  sweep_flags.attach(sweep);
  sweep->add_option("--axis", sweep_axis, "distance|heading|seed")
      ->required()
      ->check(CLI::IsMember({"distance", "heading", "seed"}));
  sweep->add_option("--values", sweep_values, "distances in mm, headings in deg or seeds")->required();
  sweep->add_option("--out", sweep_out, "directory for sweep.csv and quartiles.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (tablet->parsed()) {
      const RunConfig config = tablet_flags.resolve();
      const Scene scene = make_scene(config);
      const std::string header = stl_header_for(config_hash(config));
      const auto format = tablet_format == "binary" ? StlFormat::binary : StlFormat::ascii;
      fs::create_directories(tablet_out);
      write_stl_file(scene.nominal, (fs::path(tablet_out) / "nominal.stl").string(), format, header);
      write_stl_file(scene.truth, (fs::path(tablet_out) / "truth.stl").string(), format, header);
      write_file(fs::path(tablet_out) / "config.json", config_to_json(config).dump(2) + "\n");
      std::printf("nominal %zu faces, truth %zu faces, defect face %u\n", scene.nominal.num_faces(),
                  scene.truth.num_faces(), scene.defect_face);
    } else if (simulate->parsed()) {
      const RunConfig config = sim_flags.resolve();
      const std::string hash = config_hash(config);
      const TriMesh truth = load_mesh(sim_mesh, hash, "mesh");
      const Bvh bvh(truth);
      const int count = sim_count.value_or(config.n_clouds);
      fs::create_directories(sim_out);
      for (int k = sim_first; k < sim_first + count; ++k) {
        PointCloud cloud;
        if (!sim_pose.empty()) {
          cloud = simulate_cloud(truth, bvh, read_pose(sim_pose), config.camera,
                                 cloud_seed(config, static_cast<std::uint64_t>(k)));
          cloud.seq = static_cast<std::uint64_t>(k);
          cloud.config_hash = hash;
        } else {
          cloud = acquire_cloud(truth, bvh, config, static_cast<std::uint64_t>(k));
        }
        char name[32];
        std::snprintf(name, sizeof name, "cloud_%04d.ply", k);
        write_cloud(cloud, (fs::path(sim_out) / name).string());
        std::printf("%s: %zu points\n", name, cloud.points.size());
      }
    } else if (estimate->parsed()) {
      const RunConfig config = est_flags.resolve();
      const std::string hash = config_hash(config);
      const TriMesh nominal = load_mesh(est_mesh, hash, "mesh");
      const Bvh bvh(nominal);
      const auto files = list_files(est_clouds, ".ply");
      auto next = [&](int k) { return read_cloud(files[static_cast<std::size_t>(k - 1)].string()); };
      const auto out = estimate_stage(nominal, bvh, config, static_cast<int>(files.size()), next,
                                      fs::path(est_out) / "checkpoints");
      write_file(fs::path(est_out) / "config.json", config_to_json(config).dump(2) + "\n");
      std::printf("fused %zu clouds: %zu points used, %zu dropped\n", files.size(), out.points_used,
                  out.points_dropped);
    } else if (evaluate->parsed()) {
      const RunConfig config = eval_flags.resolve();
      const std::string hash = config_hash(config);
      const TriMesh nominal = load_mesh(eval_nominal, hash, "nominal mesh");
      const TriMesh truth = load_mesh(eval_truth, hash, "truth mesh");
      const Bvh truth_bvh(truth);
      std::vector<fs::path> files;
      if (fs::is_directory(eval_state)) {
        files = list_files(eval_state, ".json");
      } else {
        files.push_back(eval_state);
      }
      std::vector<DiagonalRecovery> trace;
      std::vector<std::uint64_t> hits(nominal.num_faces(), 0);
      for (const auto& f : files) {
        const Checkpoint cp = read_checkpoint(f.string());
        require_config_hash(cp.config_hash, hash, "checkpoint " + f.string());
        if (fingerprint_of(cp.state) != nominal.fingerprint()) {
          throw ConsistencyError("checkpoint " + f.string() + " belongs to a different nominal mesh");
        }
        trace.push_back(summarize(cp.state));
        hits = cp.hit_count;
      }
      const EvalReport report = evaluate_stage(nominal, truth, truth_bvh, config, trace, hits);
      const Eigen::VectorXd estimate =
          trace.empty() ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nominal.num_faces())) : trace.back().x_hat;
      write_report_artifacts(eval_out, nominal, report, estimate);
      print_report(report);
    } else if (pipeline->parsed()) {
      const RunConfig config = pipe_flags.resolve();
      std::optional<fs::path> out;
      if (!pipe_out.empty()) out = pipe_out;
      const PipelineResult r = run_pipeline(config, out);
      std::printf("faces %zu, points used %zu, dropped %zu\n", r.n_faces, r.points_used, r.points_dropped);
      std::printf("defect face %u: estimate %.4f mm, reference %.4f mm\n", r.defect_face,
                  r.final_estimate.x_hat[r.defect_face] / kMm, r.reference[r.defect_face] / kMm);
      print_report(r.report);
    } else if (sweep->parsed()) {
      const RunConfig config = sweep_flags.resolve();
      SweepAxis axis = SweepAxis::seed;
      std::vector<double> values = sweep_values;
      if (sweep_axis == "distance") {
        axis = SweepAxis::distance;
        for (double& v : values) v *= kMm;
      } else if (sweep_axis == "heading") {
        axis = SweepAxis::heading;
      }
      const SweepResult result = run_sweep(config, axis, values);
      const std::string table = sweep_table_csv(result);
      std::cout << table;
      if (!sweep_out.empty()) {
        fs::create_directories(sweep_out);
        write_file(fs::path(sweep_out) / "sweep.csv", table);
        if (axis == SweepAxis::seed) write_file(fs::path(sweep_out) / "quartiles.csv", quartile_table_csv(result));
        write_file(fs::path(sweep_out) / "config.json", config_to_json(config).dump(2) + "\n");
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
