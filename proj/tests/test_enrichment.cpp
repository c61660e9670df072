#include "doctest.h"

#include <cmath>

#include "msrom/enrichment.hpp"
#include "msrom/field.hpp"

using namespace msrom;

namespace {

struct Desk {
  TwoScaleMesh mesh;
  PermeabilityField kappa;
  SpMat A, M;
  TimeGrid grid{0.02, 10};
  SourceTerm f = SourceTerm::constant(1.0);
  InitialData g = InitialData::zero();

  explicit Desk(double contrast = 1e4)
      : mesh(build_two_scale_mesh(Domain{1.0, 1.0}, 24, 24, 6, 6)),
        kappa(synth_high_contrast(mesh, contrast, 11)),
        A(assemble_stiffness(mesh, kappa)),
        M(assemble_mass(mesh)) {}

  ReducedSpace stage1(int l) const {
    return assemble_multiscale_space(
        mesh, kappa, A, std::vector<int>(mesh.num_interior_coarse_nodes(), l), 1);
  }
};

}  // namespace

TEST_CASE("selection rule: theta prefixes over squared local norms") {
  ResidualReport rep;
  rep.local_norms = Vec(3);
  rep.local_norms << 3.0, 2.0, 1.0;  // squared: 9, 4, 1; total 14
  rep.global_norm = std::sqrt(14.0);

  CHECK(select_neighborhoods(rep, 0.0).empty());
  const auto all = select_neighborhoods(rep, 1.0);
  REQUIRE(all.size() == 3);

  // theta^2 = 0.7: 9 < 9.8 <= 9+4, so the two largest are selected
  const auto sel = select_neighborhoods(rep, std::sqrt(0.7));
  REQUIRE(sel.size() == 2);
  CHECK(sel[0] == 0);
  CHECK(sel[1] == 1);
}

TEST_CASE("selection: theta = 1 excludes zero residuals, ties break by index") {
  ResidualReport rep;
  rep.local_norms = Vec(4);
  rep.local_norms << 2.0, 0.0, 2.0, 1.0;
  const auto sel = select_neighborhoods(rep, 1.0);
  REQUIRE(sel.size() == 3);
  CHECK(sel[0] == 0);  // tie with 2 broken by ascending index
  CHECK(sel[1] == 2);
  CHECK(sel[2] == 3);
}

TEST_CASE("riesz identity: ||beta||^2 equals the residual evaluated at beta") {
  Desk desk;
  const auto space = desk.stage1(2);
  const auto traj = solve_coarse_trajectory(desk.mesh, space, desk.A, desk.M, desk.f,
                                            desk.g, desk.grid);
  const Vec F = assemble_load(desk.mesh, desk.f.at_time(desk.grid.dt));
  const Vec r = residual_vector(desk.A, desk.M, F, traj.states.col(0),
                                traj.states.col(1), desk.grid.dt);
  const LocalResidualSolver solver(desk.mesh, desk.A);
  for (int i = 0; i < solver.num_neighborhoods(); i += 7) {
    const auto [beta, norm] = solver.local_basis(r, i);
    CHECK(norm * norm == doctest::Approx(r.dot(beta)).epsilon(1e-10));
  }
}

TEST_CASE("exact solution leaves zero residual and zero beta") {
  Desk desk;
  // identity reduced space reproduces the fine solve, so residuals vanish
  const Mat I = Mat::Identity(desk.mesh.num_interior_nodes(), desk.mesh.num_interior_nodes());
  const auto traj =
      solve_reduced_trajectory(desk.mesh, I, desk.A, desk.M, desk.f, desk.g, desk.grid);
  const Vec F = assemble_load(desk.mesh, desk.f.at_time(desk.grid.dt));
  const Vec r = residual_vector(desk.A, desk.M, F, traj.states.col(0),
                                traj.states.col(1), desk.grid.dt);
  const LocalResidualSolver solver(desk.mesh, desk.A);
  const SymmetricSolver bstep(SpMat(desk.M + desk.grid.dt * desk.A));
  const auto rep = solver.report(r, bstep, desk.grid.dt, 1, 0);
  CHECK(rep.global_norm <= 1e-7 * F.norm());
  CHECK(std::sqrt(rep.selection_total()) <= 1e-7 * F.norm());
  const auto [beta, norm] = solver.local_basis(r, 0);
  CHECK(norm <= 1e-7 * F.norm());
}

TEST_CASE("galerkin orthogonality after appending beta") {
  Desk desk;
  auto cfg = EnrichmentConfig{};
  cfg.theta = 1.0;
  cfg.tau = 1e-12;
  cfg.max_levels = 1;
  const auto base = desk.stage1(2);
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  // after re-solving in the enriched space, the residual functional vanishes
  // on every appended column
  const Vec F = assemble_load(desk.mesh, desk.f.at_time(desk.grid.dt));
  const Vec r = residual_vector(desk.A, desk.M, F, result.trajectory.states.col(0),
                                result.trajectory.states.col(1), desk.grid.dt);
  const int added = result.space.dim() - base.dim();
  REQUIRE(added > 0);
  const Mat newcols = result.space.basis.rightCols(added);
  CHECK((newcols.transpose() * r).cwiseAbs().maxCoeff() <= 1e-8 * F.norm());
}

TEST_CASE("huge tau performs zero enrichment levels") {
  Desk desk;
  auto cfg = EnrichmentConfig{};
  cfg.tau = 1e30;
  cfg.max_levels = 5;
  const auto base = desk.stage1(2);
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  CHECK(result.space.dim() == base.dim());
  REQUIRE(result.levels_used.size() == 1);
  CHECK(result.levels_used[0] == 0);
  CHECK(result.warnings.empty());
}

TEST_CASE("each enrichment level decreases the residual; dims grow by selection") {
  Desk desk;
  auto cfg = EnrichmentConfig{};
  cfg.theta = 1.0;
  cfg.tau = 1e-12;
  cfg.max_levels = 3;
  const auto base = desk.stage1(2);
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  REQUIRE(result.reports.size() == 4);  // levels 0..3
  for (std::size_t k = 1; k < result.reports.size(); ++k)
    CHECK(result.reports[k].global_norm <=
          result.reports[k - 1].global_norm * (1.0 + 1e-10));
  // theta = 1 selects every neighborhood, one beta per level
  const int N = desk.mesh.num_interior_coarse_nodes();
  CHECK(result.space.dim() == base.dim() + 3 * N);
  for (int k = 0; k < N; ++k) CHECK(result.space.enriched_counts[k] == 3);
}

TEST_CASE("space nesting: enriched basis keeps the base columns in place") {
  Desk desk;
  auto cfg = EnrichmentConfig{};
  cfg.max_levels = 2;
  const auto base = desk.stage1(2);
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  CHECK((result.space.basis.leftCols(base.dim()) - base.basis).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("accumulate strategy skips enrichment once the tolerance is reached") {
  Desk desk(1e2);
  auto cfg = EnrichmentConfig{};
  cfg.strategy = EnrichmentConfig::Strategy::kAccumulate;
  cfg.max_levels = 4;
  cfg.enrich_steps = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto base = desk.stage1(3);
  const auto probe = residual_report_at_step(desk.mesh, desk.A, desk.M, desk.f, desk.g,
                                             desk.grid, base, 1);
  cfg.tau = 0.05 * probe.global_norm;
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  REQUIRE(result.levels_used.size() == 10);
  CHECK(result.levels_used.front() > 0);
  // once the space is rich enough, later steps do no work
  CHECK(result.levels_used.back() == 0);
  int zero_tail = 0;
  for (auto it = result.levels_used.rbegin();
       it != result.levels_used.rend() && *it == 0; ++it)
    ++zero_tail;
  CHECK(zero_tail >= 3);
}

TEST_CASE("reset strategy restarts from the stage-1 space at each enrichment step") {
  Desk desk;
  auto cfg = EnrichmentConfig{};
  cfg.strategy = EnrichmentConfig::Strategy::kReset;
  cfg.max_levels = 1;
  cfg.enrich_steps = {1, 2};
  const auto base = desk.stage1(2);
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  // final space holds base + one level from step 2 only (step-1 betas were
  // discarded by the reset)
  const int N = desk.mesh.num_interior_coarse_nodes();
  CHECK(result.space.dim() == base.dim() + N);
  REQUIRE(result.levels_used.size() == 2);
  CHECK(result.levels_used[0] == 1);
  CHECK(result.levels_used[1] == 1);
}

TEST_CASE("nonoverlap filter yields pairwise disjoint coarse-element sets") {
  Desk desk;
  const std::vector<int> all = {0, 1, 2, 7, 12, 24};
  const auto kept = filter_nonoverlapping(desk.mesh, all);
  CHECK(!kept.empty());
  std::vector<char> taken(desk.mesh.num_coarse_elements(), 0);
  for (int k : kept)
    for (int E : neighborhood_of(desk.mesh, k).coarse_elements) {
      CHECK(taken[E] == 0);
      taken[E] = 1;
    }
}

TEST_CASE("max level reached with residual above tau emits a warning") {
  Desk desk;
  auto cfg = EnrichmentConfig{};
  cfg.max_levels = 1;
  cfg.tau = 1e-300;  // unreachable
  const auto base = desk.stage1(1);
  const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f,
                                        desk.g, desk.grid, base, cfg, 1);
  REQUIRE(result.warnings.size() == 1);
  CHECK(result.warnings[0].find("stopped at level") != std::string::npos);
}

TEST_CASE("energy error at the enriched step is non-increasing in the level") {
  Desk desk;
  const auto fine = solve_fine_trajectory(desk.mesh, desk.A, desk.M, desk.f, desk.g,
                                          desk.grid);
  const auto base = desk.stage1(2);
  double prev = std::numeric_limits<double>::infinity();
  for (int levels = 0; levels <= 3; ++levels) {
    auto cfg = EnrichmentConfig{};
    cfg.max_levels = levels;
    const auto result = enrich_trajectory(desk.mesh, desk.A, desk.M, desk.f, desk.g,
                                          desk.grid, base, cfg, 1);
    const double err = energy_norm(
        desk.A, result.trajectory.states.col(1) - fine.states.col(1));
    CHECK(err <= prev * (1.0 + 1e-12));
    prev = err;
  }
}

TEST_CASE("enrichment config invariants") {
  EnrichmentConfig cfg;
  cfg.theta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.theta = 0.5;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.tau = 1e-9;
  cfg.enrich_steps = {0};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
