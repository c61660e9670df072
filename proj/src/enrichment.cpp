#include "msrom/enrichment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msrom/errors.hpp"
#include "msrom/util.hpp"

namespace msrom {

void EnrichmentConfig::validate() const {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw ConfigError("enrichment: theta must be in [0,1], got " + std::to_string(theta));
  if (!(tau > 0.0)) throw ConfigError("enrichment: tau must be > 0");
  if (max_levels < 0) throw ConfigError("enrichment: max_levels must be >= 0");
  for (int s : enrich_steps)
    if (s < 1) throw ConfigError("enrichment: time steps are 1-based, got " + std::to_string(s));
}

Vec residual_vector(const SpMat& A, const SpMat& M, const Vec& F_n,
                    const Vec& c_prev, const Vec& c_cur, double dt) {
  return F_n + (1.0 / dt) * (M * (c_prev - c_cur)) - A * c_cur;
}

struct LocalResidualSolver::Impl {
  struct Neighborhood {
    std::vector<int> dofs;  // global interior dofs of the interior of D_i
    SpMat A_ii;
    Eigen::SimplicialLDLT<SpMat> fac;
  };
  const TwoScaleMesh* mesh = nullptr;
  std::vector<std::unique_ptr<Neighborhood>> locals;
};

LocalResidualSolver::LocalResidualSolver(const TwoScaleMesh& mesh, const SpMat& A)
    : impl_(std::make_unique<Impl>()) {
  impl_->mesh = &mesh;
  const int N = mesh.num_interior_coarse_nodes();
  impl_->locals.reserve(N);
  for (int k = 0; k < N; ++k) {
    impl_->locals.push_back(std::make_unique<Impl::Neighborhood>());
    auto& loc = *impl_->locals[k];
    const CoarseNeighborhood nb = neighborhood_of(mesh, k);
    std::vector<int> dof_map(A.rows(), -1);
    for (int node : nb.interior_nodes) {
      const int dof = mesh.interior_index(node);
      // Interior nodes of D_i are always interior to the domain.
      dof_map[dof] = static_cast<int>(loc.dofs.size());
      loc.dofs.push_back(dof);
    }
    const int ni = static_cast<int>(loc.dofs.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (int d = 0; d < ni; ++d) {
      const int col = loc.dofs[d];
      for (SpMat::InnerIterator it(A, col); it; ++it) {
        const int ri = dof_map[it.row()];
        if (ri >= 0) trip.emplace_back(ri, d, it.value());
      }
    }
    loc.A_ii.resize(ni, ni);
    loc.A_ii.setFromTriplets(trip.begin(), trip.end());
    loc.fac.compute(loc.A_ii);
    if (loc.fac.info() != Eigen::Success)
      throw NumericalError("residual solver: local factorization failed in neighborhood " +
                           std::to_string(k));
  }
}

LocalResidualSolver::~LocalResidualSolver() = default;
LocalResidualSolver::LocalResidualSolver(LocalResidualSolver&&) noexcept = default;

int LocalResidualSolver::num_neighborhoods() const {
  return static_cast<int>(impl_->locals.size());
}

std::pair<Vec, double> LocalResidualSolver::local_basis(const Vec& residual, int i) const {
  const auto& loc = *impl_->locals.at(i);
  const int ni = static_cast<int>(loc.dofs.size());
  Vec r_loc(ni);
  for (int d = 0; d < ni; ++d) r_loc[d] = residual[loc.dofs[d]];
  const Vec beta_loc = loc.fac.solve(r_loc);
  const double norm = std::sqrt(std::max(beta_loc.dot(loc.A_ii * beta_loc), 0.0));
  Vec beta = Vec::Zero(residual.size());
  for (int d = 0; d < ni; ++d) beta[loc.dofs[d]] = beta_loc[d];
  return {std::move(beta), norm};
}

ResidualReport LocalResidualSolver::report(const Vec& residual,
                                           const SymmetricSolver& step_solver,
                                           double dt, int time_step, int level,
                                           int workers) const {
  ResidualReport rep;
  rep.time_step = time_step;
  rep.level = level;
  const int N = num_neighborhoods();
  rep.local_norms.resize(N);
  parallel_for(N, workers, [&](int i) {
    const auto& loc = *impl_->locals[i];
    const int ni = static_cast<int>(loc.dofs.size());
    Vec r_loc(ni);
    for (int d = 0; d < ni; ++d) r_loc[d] = residual[loc.dofs[d]];
    const Vec beta_loc = loc.fac.solve(r_loc);
    rep.local_norms[i] = std::sqrt(std::max(beta_loc.dot(loc.A_ii * beta_loc), 0.0));
  });
  rep.global_norm = std::sqrt(std::max(dt * residual.dot(step_solver.solve(residual)), 0.0));
  return rep;
}

std::vector<int> select_neighborhoods(const ResidualReport& report, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw ConfigError("select_neighborhoods: theta must be in [0,1]");
  const int N = static_cast<int>(report.local_norms.size());
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return report.local_norms[a] * report.local_norms[a] >
           report.local_norms[b] * report.local_norms[b];
  });
  // Total accumulated in sorted order so the theta = 1 prefix terminates
  // exactly after the last nonzero entry.
  double total = 0.0;
  for (int i : order) total += report.local_norms[i] * report.local_norms[i];
  const double target = theta * theta * total;
  std::vector<int> selected;
  double sum = 0.0;
  for (int i : order) {
    if (sum >= target) break;
    if (report.local_norms[i] == 0.0) break;
    selected.push_back(i);
    sum += report.local_norms[i] * report.local_norms[i];
  }
  return selected;
}

std::vector<int> filter_nonoverlapping(const TwoScaleMesh& mesh,
                                       const std::vector<int>& selected) {
  std::vector<char> taken(mesh.num_coarse_elements(), 0);
  std::vector<int> kept;
  for (int k : selected) {
    const CoarseNeighborhood nb = neighborhood_of(mesh, k);
    bool clash = false;
    for (int E : nb.coarse_elements)
      if (taken[E]) clash = true;
    if (clash) continue;
    for (int E : nb.coarse_elements) taken[E] = 1;
    kept.push_back(k);
  }
  return kept;
}

EnrichmentResult enrich_trajectory(const TwoScaleMesh& mesh, const SpMat& A,
                                   const SpMat& M, const SourceTerm& f,
                                   const InitialData& g, const TimeGrid& grid,
                                   const ReducedSpace& base,
                                   const EnrichmentConfig& cfg, int workers) {
  cfg.validate();
  const LocalResidualSolver localres(mesh, A);
  const SymmetricSolver step_solver(SpMat(M + grid.dt * A));
  std::vector<char> enrich_here(grid.steps + 1, 0);
  for (int s : cfg.enrich_steps)
    if (s <= grid.steps) enrich_here[s] = 1;

  EnrichmentResult result;
  result.space = base;
  result.trajectory.grid = grid;
  result.trajectory.states.resize(mesh.num_interior_nodes(), grid.steps + 1);

  auto stepper = std::make_unique<ReducedStepper>(mesh, result.space.basis, A, M, f, grid);
  result.trajectory.states.col(0) = stepper->initial_state(mesh, g);

  Vec F = assemble_load(mesh, f.at_time(0.0));
  for (int n = 1; n <= grid.steps; ++n) {
    if (!f.time_constant) F = assemble_load(mesh, f.at_time(grid.time(n)));
    const Vec c_prev = result.trajectory.states.col(n - 1);

    if (!enrich_here[n]) {
      result.trajectory.states.col(n) = stepper->step(c_prev, n);
      continue;
    }

    if (cfg.strategy == EnrichmentConfig::Strategy::kReset &&
        result.space.dim() != base.dim()) {
      result.space = base;
      stepper = std::make_unique<ReducedStepper>(mesh, result.space.basis, A, M, f, grid);
    }

    int level = 0;
    Vec c_cur;
    for (;;) {
      c_cur = stepper->step(c_prev, n);
      const Vec r = residual_vector(A, M, F, c_prev, c_cur, grid.dt);
      ResidualReport rep = localres.report(r, step_solver, grid.dt, n, level, workers);
      const double norm = rep.global_norm;
      result.reports.push_back(std::move(rep));
      if (norm <= cfg.tau) break;
      if (level >= cfg.max_levels) {
        if (cfg.max_levels > 0)
          result.warnings.push_back("enrichment at step " + std::to_string(n) +
                                    " stopped at level " + std::to_string(level) +
                                    " with ||R|| = " + std::to_string(norm) +
                                    " > tau = " + std::to_string(cfg.tau));
        break;
      }
      std::vector<int> selected = select_neighborhoods(result.reports.back(), cfg.theta);
      if (cfg.nonoverlap_filter) selected = filter_nonoverlapping(mesh, selected);
      if (selected.empty()) break;

      Mat add(mesh.num_interior_nodes(), selected.size());
      parallel_for(static_cast<int>(selected.size()), workers, [&](int s) {
        auto [beta, norm_i] = localres.local_basis(r, selected[s]);
        add.col(s) = beta / norm_i;
      });
      result.space.append_columns(add, selected);
      stepper = std::make_unique<ReducedStepper>(mesh, result.space.basis, A, M, f, grid);
      ++level;
    }
    result.levels_used.push_back(level);
    result.trajectory.states.col(n) = c_cur;
  }
  return result;
}

ResidualReport residual_report_at_step(const TwoScaleMesh& mesh, const SpMat& A,
                                       const SpMat& M, const SourceTerm& f,
                                       const InitialData& g, const TimeGrid& grid,
                                       const ReducedSpace& space, int at_step) {
  if (at_step < 1 || at_step > grid.steps)
    throw ConfigError("residual_report_at_step: step out of range");
  const LocalResidualSolver localres(mesh, A);
  const SymmetricSolver step_solver(SpMat(M + grid.dt * A));
  ReducedStepper stepper(mesh, space.basis, A, M, f, grid);
  Vec c_prev = stepper.initial_state(mesh, g);
  Vec c_cur;
  for (int n = 1; n <= at_step; ++n) {
    c_cur = stepper.step(c_prev, n);
    if (n < at_step) c_prev = c_cur;
  }
  const Vec F = assemble_load(mesh, f.at_time(grid.time(at_step)));
  const Vec r = residual_vector(A, M, F, c_prev, c_cur, grid.dt);
  return localres.report(r, step_solver, grid.dt, at_step, 0);
}

}  // namespace msrom
