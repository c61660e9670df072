#pragma once

#include <optional>
#include <vector>

#include "msrom/assembly.hpp"
#include "msrom/timestep.hpp"

namespace msrom {

/// Fine-grid function supported on a cell block, values in block-local node
/// order.
struct PatchFunction {
  CellBlock block;
  Vec values;

  /// Values scattered to a vector over all fine nodes.
  Vec to_nodes(const TwoScaleMesh& mesh) const;
  /// Values scattered to interior fine dofs (boundary values dropped).
  Vec to_interior(const TwoScaleMesh& mesh) const;
};

/// Harmonic extensions of boundary deltas on one coarse neighborhood.
/// Column j is 1 at boundary fine node j of D_i, 0 at the other boundary
/// nodes, and discretely kappa-harmonic inside.
struct LocalSnapshotSpace {
  int index = 0;
  CellBlock block;
  Mat columns;                      // block nodes x L_i
  std::vector<int> boundary_local;  // block-local ids, column order
  std::vector<int> interior_local;

  int count() const { return static_cast<int>(columns.cols()); }
};

/// One kappa-harmonic partition-of-unity function per interior coarse node,
/// each supported in its neighborhood and zero on its boundary.
struct PartitionOfUnity {
  std::vector<PatchFunction> chi;
};

struct SpectralSelection {
  // Ascending eigenvalues of the neighborhood pencil, one per retained
  // kappa_hat-positive direction (= L_i except next to domain corners).
  Vec eigenvalues;
  Mat local_basis;      // block nodes x l, chi-multiplied eigenfunctions
  Mat snapshot_coeffs;  // L_i x l eigenvectors in snapshot coordinates
};

/// Multiscale (or POD) space: basis columns over interior fine dofs plus the
/// spectral bookkeeping of its construction.
struct ReducedSpace {
  Mat basis;                            // m x M
  std::vector<int> stage1_counts;       // l_i per neighborhood
  std::vector<Vec> node_eigenvalues;    // per neighborhood, ascending
  std::optional<double> lambda;         // min_i lambda_{l_i+1}, if all l_i < L_i
  std::vector<int> column_owner;        // neighborhood of each column
  std::vector<int> enriched_counts;     // residual-driven columns per neighborhood

  int dim() const { return static_cast<int>(basis.cols()); }
  void append_columns(const Mat& cols, const std::vector<int>& owners);
};

LocalSnapshotSpace compute_snapshots(const TwoScaleMesh& mesh,
                                     const PermeabilityField& kappa,
                                     const CoarseNeighborhood& nb);

/// chi_i: per coarse element K of D_i, the kappa-harmonic extension of the
/// bilinear hat of x_i restricted to the edges of K; zero on the boundary of
/// the neighborhood.
PatchFunction compute_pou(const TwoScaleMesh& mesh, const PermeabilityField& kappa,
                          const CoarseNeighborhood& nb);

PartitionOfUnity compute_partition_of_unity(const TwoScaleMesh& mesh,
                                            const PermeabilityField& kappa,
                                            int workers = 1);

/// Spectral weight kappa_hat = kappa * sum_i H^2 |grad chi_i|^2, constant per
/// fine triangle (indexed 2*cell + tri). H is the coarse element diameter.
std::vector<double> kappa_hat_weights(const TwoScaleMesh& mesh,
                                      const PermeabilityField& kappa,
                                      const PartitionOfUnity& pou);

/// Solves the neighborhood eigenproblem int kappa grad(phi).grad(v) =
/// lambda int kappa_hat phi v over the snapshot columns and returns the l
/// smallest eigenpairs, chi-multiplied into local multiscale basis functions.
/// Eigenvectors are kappa_hat-orthonormal; signs are fixed so each
/// eigenfunction's largest-magnitude entry is positive.
SpectralSelection spectral_select(const TwoScaleMesh& mesh,
                                  const PermeabilityField& kappa,
                                  const LocalSnapshotSpace& snapshots,
                                  const PatchFunction& chi,
                                  const std::vector<double>& kappa_hat_tri, int l);

/// Full offline stage 1: all neighborhoods, counts[i] spectral basis
/// functions each. A is the global stiffness for kappa (used for the final
/// Gram sanity check).
ReducedSpace assemble_multiscale_space(const TwoScaleMesh& mesh,
                                       const PermeabilityField& kappa,
                                       const SpMat& A,
                                       const std::vector<int>& counts,
                                       int workers = 1);

inline Trajectory solve_coarse_trajectory(const TwoScaleMesh& mesh,
                                          const ReducedSpace& space, const SpMat& A,
                                          const SpMat& M, const SourceTerm& f,
                                          const InitialData& g, const TimeGrid& grid) {
  return solve_reduced_trajectory(mesh, space.basis, A, M, f, g, grid);
}

}  // namespace msrom
