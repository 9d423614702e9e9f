#pragma once

#include "cadinspect/estimator.hpp"

#include <string>
#include <vector>

namespace cadinspect {

// Estimator state plus the bookkeeping needed to resume or evaluate a run.
struct Checkpoint {
  EstimatorState state;
  std::vector<std::uint64_t> hit_count;  // surviving measurements per face so far
  std::string config_hash;
  // False when a covariance-form checkpoint was written without its
  // off-diagonal entries; P then holds diag_P only and cannot seed a resume.
  bool covariance_complete = true;
};

// JSON {k, n_f, representation, x_hat[], diag_P[], mesh_fingerprint, ...}.
// Covariance form also stores P row-major; information form stores xi and
// either omega_diag[] or a row-major omega[]. Doubles round-trip exactly.
// With full_covariance=false a covariance-form P is reduced to diag_P.
std::string checkpoint_to_json(const Checkpoint& checkpoint, bool full_covariance = true);
Checkpoint checkpoint_from_json(const std::string& text);

void write_checkpoint(const Checkpoint& checkpoint, const std::string& path,
                      bool full_covariance = true);
Checkpoint read_checkpoint(const std::string& path);

// x_hat and diag(P) for either representation.
DiagonalRecovery summarize(const EstimatorState& state);
std::uint64_t iteration_of(const EstimatorState& state);
std::uint64_t fingerprint_of(const EstimatorState& state);

}  // namespace cadinspect
