#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "msrom/gmsfem.hpp"

namespace msrom {

/// Residual sizes at one (time step, enrichment level). Local norms are
/// energy-dual norms, ||R_i|| = ||beta_i||_{V_i} via the Riesz representative,
/// and drive the theta-selection (whose budget is sum ||R_i||^2). The global
/// norm is the dual norm with respect to the step bilinear form
/// (1/dt)<u,v> + A(u,v); in that norm Galerkin enrichment is monotone, so it
/// serves the stopping rule and the candidate ranking.
struct ResidualReport {
  int time_step = 0;
  int level = 0;
  double global_norm = 0.0;
  Vec local_norms;

  double selection_total() const { return local_norms.squaredNorm(); }
};

struct EnrichmentConfig {
  enum class Strategy { kReset, kAccumulate };

  double theta = 1.0;                 // selection fraction, in [0,1]
  double tau = 1e-12;                 // stop when ||R|| <= tau
  int max_levels = 0;                 // per enrichment time step
  Strategy strategy = Strategy::kReset;
  std::vector<int> enrich_steps = {1};
  bool nonoverlap_filter = false;

  void validate() const;
};

/// Residual functional coefficients over interior fine dofs at one implicit
/// Euler step: r = F^n + (1/dt) M c^{n-1} - (A + (1/dt) M) c^n.
Vec residual_vector(const SpMat& A, const SpMat& M, const Vec& F_n,
                    const Vec& c_prev, const Vec& c_cur, double dt);

/// Riesz solves of local residual functionals on the zero-trace fine space of
/// each neighborhood. Factorizations are built once per kappa and reused
/// across levels and time steps.
class LocalResidualSolver {
 public:
  LocalResidualSolver(const TwoScaleMesh& mesh, const SpMat& A);
  ~LocalResidualSolver();
  LocalResidualSolver(LocalResidualSolver&&) noexcept;

  int num_neighborhoods() const;

  /// beta supported in D_i (as a global interior-dof vector) with
  /// A(beta, v) = R_i(v), plus ||beta||_{V_i} computed from the energy.
  std::pair<Vec, double> local_basis(const Vec& residual, int i) const;

  /// step_solver must solve (M + dt A) x = rhs; it supplies the global dual
  /// norm via ||R||^2 = dt * r^T (M + dt A)^{-1} r.
  ResidualReport report(const Vec& residual, const SymmetricSolver& step_solver,
                        double dt, int time_step, int level, int workers = 1) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Shortest prefix of neighborhoods, by descending ||R_i||^2 (ties by index),
/// whose squared sum reaches theta^2 * sum_i ||R_i||^2.
std::vector<int> select_neighborhoods(const ResidualReport& report, double theta);

/// Optional greedy filter keeping only selections whose neighborhoods share
/// no coarse element with an earlier pick.
std::vector<int> filter_nonoverlapping(const TwoScaleMesh& mesh,
                                       const std::vector<int>& selected);

struct EnrichmentResult {
  ReducedSpace space;
  Trajectory trajectory;
  std::vector<ResidualReport> reports;  // every (step, level) visited
  std::vector<int> levels_used;         // per enrichment time step
  std::vector<std::string> warnings;
};

/// Marches the trajectory, running the adaptive enrichment loop at each
/// configured time step: solve, measure residuals, select neighborhoods, add
/// residual-driven basis functions, repeat until ||R|| <= tau or max_levels.
/// Under Strategy::kReset each enrichment step restarts from `base`; under
/// kAccumulate it continues from the previous step's enriched space.
EnrichmentResult enrich_trajectory(const TwoScaleMesh& mesh, const SpMat& A,
                                   const SpMat& M, const SourceTerm& f,
                                   const InitialData& g, const TimeGrid& grid,
                                   const ReducedSpace& base,
                                   const EnrichmentConfig& cfg, int workers = 1);

/// Residual report of a plain (no enrichment) solve in a fixed space, taken
/// at time step `at_step`; used to rank candidate fields in the hierarchical
/// pipeline.
ResidualReport residual_report_at_step(const TwoScaleMesh& mesh, const SpMat& A,
                                       const SpMat& M, const SourceTerm& f,
                                       const InitialData& g, const TimeGrid& grid,
                                       const ReducedSpace& space, int at_step);

}  // namespace msrom
