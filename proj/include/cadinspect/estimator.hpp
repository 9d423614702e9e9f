#pragma once

#include "cadinspect/raycast.hpp"
#include "cadinspect/registration.hpp"
#include "cadinspect/sensor.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace cadinspect {

// Residuals of one cloud against the nominal mesh. Entry i observes face
// face_of[i]: delta_i = x_j n_j + eps_i with eps_i ~ N(0, sigma_i^2 I).
struct MeasurementBatch {
  std::vector<Vec3> residuals;
  std::vector<std::uint32_t> face_of;
  std::vector<double> sigma_of;
  std::vector<Vec3> normals;

  // Diagnostics from assembly.
  std::size_t dropped_no_correspondence = 0;
  std::size_t dropped_border = 0;
  std::size_t closest_point_fallbacks = 0;

  std::size_t size() const { return residuals.size(); }
  bool empty() const { return residuals.empty(); }
  void push_back(const Vec3& delta, std::uint32_t face, double sigma, const Vec3& normal);
  // Throws Error when lengths differ, sigma <= 0, a face is >= n_faces, or a
  // value is non-finite.
  void validate(std::size_t n_faces) const;
};

struct AssembleOptions {
  double border_exclusion_m = 0.006;
  CorrespondencePolicy policy = CorrespondencePolicy::ray_with_fallback;
  // World-frame correction applied after the cloud pose (e.g. from ICP).
  RigidTransform correction = RigidTransform::identity();
};

MeasurementBatch assemble_batch(const PointCloud& cloud, const TriMesh& mesh, const Bvh& bvh,
                                const AssembleOptions& options = {});

// Per-face information sums of one batch: for every touched face j,
// information_j = sum 1/sigma_i^2 and weighted_j = sum n_j.delta_i / sigma_i^2.
// Equivalent to one scalar pseudo-measurement y_j = weighted_j /
// information_j with variance 1 / information_j.
struct FaceInformation {
  std::vector<std::uint32_t> faces;  // ascending
  std::vector<double> information;
  std::vector<double> weighted;
};

FaceInformation compress(const MeasurementBatch& batch);

struct CovarianceState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd P;
  std::uint64_t k = 0;
  std::uint64_t mesh_fingerprint = 0;

  std::size_t n_faces() const { return static_cast<std::size_t>(x_hat.size()); }
};

struct InformationState {
  Eigen::VectorXd xi;
  Eigen::SparseMatrix<double> omega;
  std::uint64_t k = 0;
  std::uint64_t mesh_fingerprint = 0;

  std::size_t n_faces() const { return static_cast<std::size_t>(xi.size()); }
  bool omega_is_diagonal() const;
};

using EstimatorState = std::variant<CovarianceState, InformationState>;

// x_hat = 0, P = sigma0^2 I.
CovarianceState covariance_prior(std::size_t n_faces, double sigma0_m,
                                 std::uint64_t mesh_fingerprint = 0);
// xi = 0, Omega = I / sigma0^2.
InformationState information_prior(std::size_t n_faces, double sigma0_m,
                                   std::uint64_t mesh_fingerprint = 0);

// How the observation matrix enters an update.
enum class UpdateForm {
  // One scalar pseudo-measurement per touched face (default).
  compressed,
  // Literal 3-row block per residual with R = blkdiag(sigma_i^2 I3).
  stacked,
};

// Recursive weighted least squares:
//   S = H P H^T + R,  W = P H^T S^-1,
//   x+ = x + W (Delta - H x),  P+ = (I - W H) P,
// with P+ re-symmetrised. Only columns of touched faces are formed.
CovarianceState rwls_update(const CovarianceState& state, const MeasurementBatch& batch,
                            UpdateForm form = UpdateForm::compressed);

// Information form: Omega+ = H^T R^-1 H + Omega, xi+ = H^T R^-1 Delta + xi.
// H^T R^-1 H is diagonal, so a diagonal Omega stays diagonal.
InformationState info_update(const InformationState& state, const MeasurementBatch& batch,
                             UpdateForm form = UpdateForm::compressed);

// Full covariance form: x_hat = Omega^-1 xi by Cholesky, P = Omega^-1.
// Throws NumericError if Omega is not positive definite.
CovarianceState recover(const InformationState& state);

struct DiagonalRecovery {
  Eigen::VectorXd x_hat;
  Eigen::VectorXd diag_P;
};

// x_hat and diag(Omega^-1) without materialising P; O(n) for diagonal Omega.
DiagonalRecovery recover_diagonal(const InformationState& state);

// Same quantities for a covariance-form state.
DiagonalRecovery diagonal_of(const CovarianceState& state);

// Converts covariance form to information form (Omega = P^-1, xi = Omega x).
InformationState to_information(const CovarianceState& state);

// Single stacked normal-equation solve over every batch:
//   (P0^-1 + sum H^T R^-1 H) x = P0^-1 x0 + sum H^T R^-1 Delta.
// Independent of the recursive updates; used to verify them.
CovarianceState batch_wls_oracle(std::span<const MeasurementBatch> batches,
                                 const CovarianceState& prior);

}  // namespace cadinspect
