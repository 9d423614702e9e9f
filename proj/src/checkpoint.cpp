#include "cadinspect/checkpoint.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cadinspect {
namespace {

using nlohmann::json;

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index n) {
  if (static_cast<Eigen::Index>(v.size()) != n * n) throw ParseError("checkpoint matrix has wrong size");
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = v[static_cast<std::size_t>(r * n + c)];
  }
  return m;
}

}  // namespace

DiagonalRecovery summarize(const EstimatorState& state) {
  if (const auto* cov = std::get_if<CovarianceState>(&state)) return diagonal_of(*cov);
  return recover_diagonal(std::get<InformationState>(state));
}

std::uint64_t iteration_of(const EstimatorState& state) {
  return std::visit([](const auto& s) { return s.k; }, state);
}

std::uint64_t fingerprint_of(const EstimatorState& state) {
  return std::visit([](const auto& s) { return s.mesh_fingerprint; }, state);
}

std::string checkpoint_to_json(const Checkpoint& checkpoint, bool full_covariance) {
  json j;
  const auto summary = summarize(checkpoint.state);
  j["k"] = iteration_of(checkpoint.state);
  j["n_f"] = summary.x_hat.size();
  j["mesh_fingerprint"] = to_hex(fingerprint_of(checkpoint.state));
  j["config_hash"] = checkpoint.config_hash;
  j["x_hat"] = to_vector(summary.x_hat);
  j["diag_P"] = to_vector(summary.diag_P);
  j["hit_count"] = checkpoint.hit_count;
  if (const auto* cov = std::get_if<CovarianceState>(&checkpoint.state)) {
    j["representation"] = "covariance";
    if (full_covariance) j["P"] = row_major(cov->P);
  } else {
    const auto& info = std::get<InformationState>(checkpoint.state);
    j["representation"] = "information";
    j["xi"] = to_vector(info.xi);
    if (info.omega_is_diagonal()) {
      j["omega_diag"] = to_vector(info.omega.diagonal());
    } else {
      j["omega"] = row_major(Eigen::MatrixXd(info.omega));
    }
  }
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint out;
  try {
    const json j = json::parse(text);
    const auto n = j.at("n_f").get<Eigen::Index>();
    const auto k = j.at("k").get<std::uint64_t>();
    const auto fp = std::stoull(j.at("mesh_fingerprint").get<std::string>(), nullptr, 16);
    out.config_hash = j.value("config_hash", std::string());
    out.hit_count = j.value("hit_count", std::vector<std::uint64_t>());
    const auto rep = j.at("representation").get<std::string>();
    if (rep == "covariance") {
      CovarianceState s;
      s.x_hat = from_vector(j.at("x_hat").get<std::vector<double>>());
      if (j.contains("P")) {
        s.P = from_row_major(j["P"].get<std::vector<double>>(), n);
      } else {
        s.P = from_vector(j.at("diag_P").get<std::vector<double>>()).asDiagonal();
        out.covariance_complete = false;
      }
      s.k = k;
      s.mesh_fingerprint = fp;
      out.state = std::move(s);
    } else if (rep == "information") {
      InformationState s;
      s.xi = from_vector(j.at("xi").get<std::vector<double>>());
      if (j.contains("omega_diag")) {
        const auto d = j["omega_diag"].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(d.size()) != n) throw ParseError("omega_diag has wrong size");
        s.omega.resize(n, n);
        s.omega.reserve(Eigen::VectorXi::Constant(n, 1));
        for (Eigen::Index i = 0; i < n; ++i) s.omega.insert(i, i) = d[static_cast<std::size_t>(i)];
        s.omega.makeCompressed();
      } else {
        s.omega = from_row_major(j.at("omega").get<std::vector<double>>(), n).sparseView(1.0, 0.0);
      }
      s.k = k;
      s.mesh_fingerprint = fp;
      out.state = std::move(s);
    } else {
      throw ParseError("unknown checkpoint representation '" + rep + "'");
    }
    if (summarize(out.state).x_hat.size() != n) throw ParseError("checkpoint n_f mismatch");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::logic_error& e) {  // stoull on a bad fingerprint
    throw ParseError(std::string("malformed checkpoint fingerprint: ") + e.what());
  }
  return out;
}

void write_checkpoint(const Checkpoint& checkpoint, const std::string& path,
                      bool full_covariance) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << checkpoint_to_json(checkpoint, full_covariance) << '\n';
  if (!out) throw Error("write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace cadinspect
