#include "cadinspect/estimator.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>

namespace cadinspect {
namespace {

void require_finite(const CovarianceState& s) {
  if (!s.x_hat.allFinite() || !s.P.allFinite()) throw NumericError("covariance state is not finite");
  if (s.P.rows() != s.x_hat.size() || s.P.cols() != s.x_hat.size()) {
    throw NumericError("covariance state dimension mismatch");
  }
}

void symmetrize(Eigen::MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

// Dense column index of each touched face.
std::map<std::uint32_t, Eigen::Index> column_map(const std::vector<std::uint32_t>& faces) {
  std::map<std::uint32_t, Eigen::Index> cols;
  for (auto f : faces) cols.try_emplace(f, static_cast<Eigen::Index>(cols.size()));
  return cols;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& P, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(P.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = P.col(idx[c]);
  return out;
}

// Applies the gain-form update for observation rows that only involve the
// touched columns: H_full = H_touched * E^T where E selects `touched`.
CovarianceState gain_update(const CovarianceState& state, const std::vector<Eigen::Index>& touched,
                            const Eigen::MatrixXd& h, const Eigen::VectorXd& r_diag,
                            const Eigen::VectorXd& observation) {
  const Eigen::MatrixXd p_cols = gather_columns(state.P, touched);  // P E
  Eigen::MatrixXd p_tt(static_cast<Eigen::Index>(touched.size()),
                       static_cast<Eigen::Index>(touched.size()));
  Eigen::VectorXd x_t(static_cast<Eigen::Index>(touched.size()));
  for (std::size_t r = 0; r < touched.size(); ++r) {
    p_tt.row(static_cast<Eigen::Index>(r)) = p_cols.row(touched[r]);
    x_t[static_cast<Eigen::Index>(r)] = state.x_hat[touched[r]];
  }

  const Eigen::MatrixXd pht = p_cols * h.transpose();  // P H^T, n x m
  Eigen::MatrixXd s = h * p_tt * h.transpose();
  s.diagonal() += r_diag;
  symmetrize(s);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericError("innovation covariance S is not positive definite");
  }
  // W = P H^T S^-1, computed as (S^-1 H P)^T since S is symmetric.
  const Eigen::MatrixXd w = llt.solve(pht.transpose()).transpose();
  const Eigen::VectorXd innovation = observation - h * x_t;

  CovarianceState out = state;
  out.x_hat += w * innovation;
  out.P -= w * pht.transpose();  // (I - W H) P = P - W (P H^T)^T
  symmetrize(out.P);
  out.k = state.k + 1;
  if (!out.x_hat.allFinite() || !out.P.allFinite()) throw NumericError("RWLS update produced non-finite values");
  return out;
}

}  // namespace

void MeasurementBatch::push_back(const Vec3& delta, std::uint32_t face, double sigma,
                                 const Vec3& normal) {
  residuals.push_back(delta);
  face_of.push_back(face);
  sigma_of.push_back(sigma);
  normals.push_back(normal);
}

void MeasurementBatch::validate(std::size_t n_faces) const {
  const auto n = residuals.size();
  if (face_of.size() != n || sigma_of.size() != n || normals.size() != n) {
    throw Error("measurement batch lists have different lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (face_of[i] >= n_faces) {
      throw Error("measurement references face " + std::to_string(face_of[i]) + " of " +
                  std::to_string(n_faces));
    }
    if (!(sigma_of[i] > 0.0) || !std::isfinite(sigma_of[i])) {
      throw Error("measurement sigma must be positive and finite");
    }
    if (!residuals[i].allFinite() || !normals[i].allFinite()) {
      throw NumericError("measurement batch contains non-finite values");
    }
  }
}

MeasurementBatch assemble_batch(const PointCloud& cloud, const TriMesh& mesh, const Bvh& bvh,
                                const AssembleOptions& options) {
  MeasurementBatch batch;
  const Vec3 camera_world = options.correction.apply(cloud.pose.position);
  for (const auto& zc : cloud.points) {
    const Vec3 zw = options.correction.apply(cloud.pose.to_world(zc));
    const auto corr = correspond(bvh, mesh, zw, camera_world, options.policy);
    if (!corr) {
      ++batch.dropped_no_correspondence;
      continue;
    }
    if (corr->border_distance < options.border_exclusion_m) {
      ++batch.dropped_border;
      continue;
    }
    if (corr->mode == CorrespondenceMode::closest_point) ++batch.closest_point_fallbacks;
    batch.push_back(zw - corr->footpoint, corr->face_index, noise_sigma(cloud.model, zc.norm()),
                    mesh.face_normal(corr->face_index));
  }
  return batch;
}

FaceInformation compress(const MeasurementBatch& batch) {
  std::map<std::uint32_t, std::pair<double, double>> sums;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec3& n = batch.normals[i];
    const double w = 1.0 / (batch.sigma_of[i] * batch.sigma_of[i]);
    auto& [info, weighted] = sums[batch.face_of[i]];
    info += n.squaredNorm() * w;
    weighted += n.dot(batch.residuals[i]) * w;
  }
  FaceInformation out;
  out.faces.reserve(sums.size());
  for (const auto& [face, s] : sums) {
    out.faces.push_back(face);
    out.information.push_back(s.first);
    out.weighted.push_back(s.second);
  }
  return out;
}

bool InformationState::omega_is_diagonal() const {
  for (Eigen::Index c = 0; c < omega.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(omega, c); it; ++it) {
      if (it.row() != it.col() && it.value() != 0.0) return false;
    }
  }
  return true;
}

CovarianceState covariance_prior(std::size_t n_faces, double sigma0_m, std::uint64_t mesh_fingerprint) {
  if (!(sigma0_m > 0.0)) throw Error("prior sigma0 must be positive");
  const auto n = static_cast<Eigen::Index>(n_faces);
  CovarianceState s;
  s.x_hat = Eigen::VectorXd::Zero(n);
  s.P = Eigen::MatrixXd::Identity(n, n) * (sigma0_m * sigma0_m);
  s.mesh_fingerprint = mesh_fingerprint;
  return s;
}

InformationState information_prior(std::size_t n_faces, double sigma0_m,
                                   std::uint64_t mesh_fingerprint) {
  if (!(sigma0_m > 0.0)) throw Error("prior sigma0 must be positive");
  const auto n = static_cast<Eigen::Index>(n_faces);
  InformationState s;
  s.xi = Eigen::VectorXd::Zero(n);
  s.omega.resize(n, n);
  s.omega.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index j = 0; j < n; ++j) s.omega.insert(j, j) = 1.0 / (sigma0_m * sigma0_m);
  s.omega.makeCompressed();
  s.mesh_fingerprint = mesh_fingerprint;
  return s;
}

CovarianceState rwls_update(const CovarianceState& state, const MeasurementBatch& batch,
                            UpdateForm form) {
  require_finite(state);
  batch.validate(state.n_faces());
  if (batch.empty()) {
    CovarianceState out = state;
    out.k = state.k + 1;
    return out;
  }

  if (form == UpdateForm::compressed) {
    const FaceInformation fi = compress(batch);
    const auto m = static_cast<Eigen::Index>(fi.faces.size());
    std::vector<Eigen::Index> touched(fi.faces.begin(), fi.faces.end());
    Eigen::VectorXd r(m), y(m);
    for (Eigen::Index c = 0; c < m; ++c) {
      r[c] = 1.0 / fi.information[static_cast<std::size_t>(c)];
      y[c] = fi.weighted[static_cast<std::size_t>(c)] * r[c];
    }
    return gain_update(state, touched, Eigen::MatrixXd::Identity(m, m), r, y);
  }

  const auto cols = column_map(batch.face_of);
  std::vector<Eigen::Index> touched(cols.size());
  for (const auto& [face, c] : cols) touched[static_cast<std::size_t>(c)] = face;
  const auto rows = static_cast<Eigen::Index>(3 * batch.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(touched.size()));
  Eigen::VectorXd r(rows), delta(rows);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(3 * i);
    h.block<3, 1>(row, cols.at(batch.face_of[i])) = batch.normals[i];
    r.segment<3>(row).setConstant(batch.sigma_of[i] * batch.sigma_of[i]);
    delta.segment<3>(row) = batch.residuals[i];
  }
  return gain_update(state, touched, h, r, delta);
}

InformationState info_update(const InformationState& state, const MeasurementBatch& batch,
                             UpdateForm form) {
  batch.validate(state.n_faces());
  InformationState out = state;
  out.k = state.k + 1;
  if (batch.empty()) return out;

  if (form == UpdateForm::compressed) {
    const FaceInformation fi = compress(batch);
    for (std::size_t c = 0; c < fi.faces.size(); ++c) {
      const auto j = static_cast<Eigen::Index>(fi.faces[c]);
      out.omega.coeffRef(j, j) += fi.information[c];
      out.xi[j] += fi.weighted[c];
    }
  } else {
    const auto rows = static_cast<Eigen::Index>(3 * batch.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(3 * batch.size());
    Eigen::VectorXd r_inv(rows), delta(rows);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(3 * i);
      for (int c = 0; c < 3; ++c) {
        triplets.emplace_back(row + c, static_cast<Eigen::Index>(batch.face_of[i]), batch.normals[i][c]);
      }
      r_inv.segment<3>(row).setConstant(1.0 / (batch.sigma_of[i] * batch.sigma_of[i]));
      delta.segment<3>(row) = batch.residuals[i];
    }
    Eigen::SparseMatrix<double> h(rows, static_cast<Eigen::Index>(state.n_faces()));
    h.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::SparseMatrix<double> ht_rinv = h.transpose() * r_inv.asDiagonal();
    out.omega = (ht_rinv * h).pruned() + state.omega;
    out.xi += ht_rinv * delta;
  }
  out.omega.makeCompressed();
  if (!out.xi.allFinite()) throw NumericError("information update produced non-finite values");
  return out;
}

CovarianceState recover(const InformationState& state) {
  const auto n = static_cast<Eigen::Index>(state.n_faces());
  CovarianceState out;
  out.k = state.k;
  out.mesh_fingerprint = state.mesh_fingerprint;
  if (state.omega_is_diagonal()) {
    const Eigen::VectorXd d = state.omega.diagonal();
    if ((d.array() <= 0.0).any() || !d.allFinite()) {
      throw NumericError("information matrix lost positive definiteness");
    }
    out.x_hat = state.xi.cwiseQuotient(d);
    out.P = d.cwiseInverse().asDiagonal();
    return out;
  }
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(state.omega);
  if (llt.info() != Eigen::Success) throw NumericError("Cholesky of the information matrix failed");
  out.x_hat = llt.solve(state.xi);
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  out.P = llt.solve(identity);
  symmetrize(out.P);
  return out;
}

DiagonalRecovery recover_diagonal(const InformationState& state) {
  if (!state.omega_is_diagonal()) {
    return diagonal_of(recover(state));
  }
  const Eigen::VectorXd d = state.omega.diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) {
    throw NumericError("information matrix lost positive definiteness");
  }
  return {state.xi.cwiseQuotient(d), d.cwiseInverse()};
}

DiagonalRecovery diagonal_of(const CovarianceState& state) {
  return {state.x_hat, state.P.diagonal()};
}

InformationState to_information(const CovarianceState& state) {
  require_finite(state);
  Eigen::LLT<Eigen::MatrixXd> llt(state.P);
  if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite");
  const auto n = state.P.rows();
  Eigen::MatrixXd omega = llt.solve(Eigen::MatrixXd::Identity(n, n));
  symmetrize(omega);
  InformationState out;
  out.omega = omega.sparseView(1.0, 0.0);
  out.omega.makeCompressed();
  out.xi = omega * state.x_hat;
  out.k = state.k;
  out.mesh_fingerprint = state.mesh_fingerprint;
  return out;
}

CovarianceState batch_wls_oracle(std::span<const MeasurementBatch> batches,
                                 const CovarianceState& prior) {
  require_finite(prior);
  const auto n = static_cast<Eigen::Index>(prior.n_faces());
  Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.P);
  if (prior_llt.info() != Eigen::Success) throw NumericError("prior covariance is not positive definite");
  Eigen::MatrixXd normal = prior_llt.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd rhs = normal * prior.x_hat;

  for (const auto& batch : batches) {
    batch.validate(prior.n_faces());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      // H_i is 3 x n with the single nonzero column n_j at j.
      const auto j = static_cast<Eigen::Index>(batch.face_of[i]);
      const double w = 1.0 / (batch.sigma_of[i] * batch.sigma_of[i]);
      normal(j, j) += batch.normals[i].dot(batch.normals[i]) * w;
      rhs[j] += batch.normals[i].dot(batch.residuals[i]) * w;
    }
  }
  symmetrize(normal);
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) throw NumericError("stacked normal equations are singular");
  CovarianceState out;
  out.x_hat = llt.solve(rhs);
  out.P = llt.solve(Eigen::MatrixXd::Identity(n, n));
  symmetrize(out.P);
  out.k = prior.k + batches.size();
  out.mesh_fingerprint = prior.mesh_fingerprint;
  return out;
}

}  // namespace cadinspect
