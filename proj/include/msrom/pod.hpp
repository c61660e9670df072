#pragma once

#include <vector>

#include "msrom/assembly.hpp"
#include "msrom/timestep.hpp"

namespace msrom {

/// Global solution snapshot bank: coarse states c_H^j (j = 1..n per
/// trajectory) and their backward difference quotients, plus the Poincare
/// constant the POD weighting uses.
struct SnapshotBank {
  Mat states;
  Mat quotients;
  std::vector<int> sample_ids;  // source sample per column
  double dt = 0.0;
  double poincare_q = 1.0;

  int columns() const { return static_cast<int>(states.cols()); }
};

SnapshotBank build_snapshot_bank(const std::vector<Trajectory>& trajectories,
                                 const std::vector<int>& sample_ids, double Q);

/// l dominant A-orthonormal modes of the Q^2-weighted snapshot correlation
/// operator (Y1 Y1^T A + Q^2 Y2 Y2^T A), solved by the method of snapshots:
/// the small Gram Z^T A Z with Z = [Y1 | Q Y2] has the same nonzero spectrum.
/// The full spectrum is retained for the tail-sum diagnostics.
struct PodSpace {
  Mat basis;        // m x l
  Vec eigenvalues;  // all bank eigenvalues, descending, clamped at 0
  int l = 0;
  double poincare_q = 1.0;

  /// sum_{p > from} lambda_p (1-based from).
  double tail_sum(int from) const;
};

PodSpace compute_pod(const SnapshotBank& bank, const SpMat& A, int l);

/// Orthogonal projection S^l y = sum_i <y, psi_i>_a psi_i.
Vec pod_project(const PodSpace& pod, const SpMat& A, const Vec& y);

/// Online solve for a new permeability sample: projects the sample's
/// operators onto the POD basis and time-steps the l-dimensional system.
inline Trajectory solve_pod_trajectory(const TwoScaleMesh& mesh, const PodSpace& pod,
                                       const SpMat& A_sample, const SpMat& M,
                                       const SourceTerm& f, const InitialData& g,
                                       const TimeGrid& grid) {
  return solve_reduced_trajectory(mesh, pod.basis, A_sample, M, f, g, grid);
}

}  // namespace msrom
