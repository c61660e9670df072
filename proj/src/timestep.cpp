#include "msrom/timestep.hpp"

#include <string>

#include "msrom/errors.hpp"

namespace msrom {

Trajectory solve_fine_trajectory(const TwoScaleMesh& mesh, const SpMat& A,
                                 const SpMat& M, const SourceTerm& f,
                                 const InitialData& g, const TimeGrid& grid,
                                 const SymmetricSolver::Options& opt) {
  const int m = static_cast<int>(A.rows());
  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(m, grid.steps + 1);

  SymmetricSolver mass_solver(M, opt);
  traj.states.col(0) = mass_solver.solve(assemble_load(mesh, g.fn));

  SpMat S = M + grid.dt * A;
  SymmetricSolver step_solver(S, opt);

  Vec F;
  if (f.time_constant) F = assemble_load(mesh, f.at_time(0.0));
  for (int n = 1; n <= grid.steps; ++n) {
    if (!f.time_constant) F = assemble_load(mesh, f.at_time(grid.time(n)));
    const Vec rhs = M * traj.states.col(n - 1) + grid.dt * F;
    traj.states.col(n) = step_solver.solve(rhs);
  }
  return traj;
}

namespace {

Eigen::LDLT<Mat> checked_ldlt(const Mat& S, const char* what) {
  Eigen::LDLT<Mat> fac(S);
  if (fac.info() != Eigen::Success || !fac.isPositive())
    throw NumericalError(std::string(what) + ": reduced system factorization failed");
  return fac;
}

}  // namespace

Trajectory solve_reduced_trajectory(const TwoScaleMesh& mesh, const Mat& V,
                                    const SpMat& A, const SpMat& M,
                                    const SourceTerm& f, const InitialData& g,
                                    const TimeGrid& grid) {
  const int m = static_cast<int>(V.rows());
  const int r = static_cast<int>(V.cols());
  const Mat Mr = V.transpose() * (M * V);
  const Mat Ar = V.transpose() * (A * V);
  const auto mass_fac = checked_ldlt(Mr, "reduced mass");
  const auto step_fac = checked_ldlt(Mr + grid.dt * Ar, "reduced step");

  Mat reduced(r, grid.steps + 1);
  reduced.col(0) = mass_fac.solve(V.transpose() * assemble_load(mesh, g.fn));

  Vec Fr;
  if (f.time_constant) Fr = V.transpose() * assemble_load(mesh, f.at_time(0.0));
  for (int n = 1; n <= grid.steps; ++n) {
    if (!f.time_constant)
      Fr = V.transpose() * assemble_load(mesh, f.at_time(grid.time(n)));
    reduced.col(n) = step_fac.solve(Mr * reduced.col(n - 1) + grid.dt * Fr);
  }

  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(m, grid.steps + 1);
  traj.states.noalias() = V * reduced;
  return traj;
}

ReducedStepper::ReducedStepper(const TwoScaleMesh& mesh, Mat V, const SpMat& A,
                               const SpMat& M, const SourceTerm& f,
                               const TimeGrid& grid)
    : mesh_(mesh), V_(std::move(V)), M_(M), f_(f), grid_(grid) {
  Mr_ = V_.transpose() * (M * V_);
  const Mat Ar = V_.transpose() * (A * V_);
  mass_fac_ = checked_ldlt(Mr_, "reduced mass");
  step_fac_ = checked_ldlt(Mr_ + grid.dt * Ar, "reduced step");
  if (f_.time_constant)
    Fr_const_ = V_.transpose() * assemble_load(mesh_, f_.at_time(0.0));
}

Vec ReducedStepper::initial_state(const TwoScaleMesh& mesh, const InitialData& g) const {
  const Vec u0 = mass_fac_.solve(V_.transpose() * assemble_load(mesh, g.fn));
  return V_ * u0;
}

Vec ReducedStepper::step(const Vec& fine_prev, int n) const {
  Vec Fr = f_.time_constant
               ? Fr_const_
               : Vec(V_.transpose() * assemble_load(mesh_, f_.at_time(grid_.time(n))));
  const Vec rhs = V_.transpose() * (M_ * fine_prev) + grid_.dt * Fr;
  const Vec u = step_fac_.solve(rhs);
  return V_ * u;
}

}  // namespace msrom
