#pragma once

#include <functional>

#include "msrom/assembly.hpp"

namespace msrom {

struct TimeGrid {
  double dt = 0.01;
  int steps = 100;

  double time(int n) const { return dt * n; }
  double final_time() const { return dt * steps; }
};

/// Time-indexed fine-grid coefficient vectors of a solve. Column n of
/// `states` holds the interior-dof coefficients at t_n, n = 0..steps.
struct Trajectory {
  TimeGrid grid;
  Mat states;

  int num_states() const { return static_cast<int>(states.cols()); }
  Vec state(int n) const { return states.col(n); }
};

/// Right-hand side f(t,x,y); time_constant lets steppers assemble the load
/// vector once.
struct SourceTerm {
  SpaceTimeFn fn;
  bool time_constant = true;

  static SourceTerm constant(double value) {
    return SourceTerm{[value](double, double, double) { return value; }, true};
  }
  SpatialFn at_time(double t) const {
    return [this, t](double x, double y) { return fn(t, x, y); };
  }
};

/// Initial data g(x,y); the discrete initial state is its L2 projection.
struct InitialData {
  SpatialFn fn;

  static InitialData zero() {
    return InitialData{[](double, double) { return 0.0; }};
  }
  static InitialData constant(double value) {
    return InitialData{[value](double, double) { return value; }};
  }
};

/// Implicit Euler on the fine grid: (M + dt A) c^n = M c^{n-1} + dt F^n with
/// F^n assembled at t_n and M c^0 = <g, basis>. One factorization of
/// (M + dt A) is reused across all steps.
Trajectory solve_fine_trajectory(const TwoScaleMesh& mesh, const SpMat& A,
                                 const SpMat& M, const SourceTerm& f,
                                 const InitialData& g, const TimeGrid& grid,
                                 const SymmetricSolver::Options& opt = {});

/// Galerkin implicit Euler on the column span of V (m x M basis over interior
/// fine dofs). Marches in reduced coordinates and returns the fine-grid
/// projection V u^n per step.
Trajectory solve_reduced_trajectory(const TwoScaleMesh& mesh, const Mat& V,
                                    const SpMat& A, const SpMat& M,
                                    const SourceTerm& f, const InitialData& g,
                                    const TimeGrid& grid);

/// One implicit-Euler step on a fixed reduced basis, fine coordinates in and
/// out. Used by the enrichment loop, where the basis changes mid-trajectory
/// and the previous state is only available as a fine-grid vector.
class ReducedStepper {
 public:
  ReducedStepper(const TwoScaleMesh& mesh, Mat V, const SpMat& A, const SpMat& M,
                 const SourceTerm& f, const TimeGrid& grid);

  /// L2 projection of g onto the reduced space, fine coordinates.
  Vec initial_state(const TwoScaleMesh& mesh, const InitialData& g) const;
  /// c^n from c^{n-1}; rhs is formed in fine coordinates so `fine_prev` may
  /// come from a different (smaller) space.
  Vec step(const Vec& fine_prev, int n) const;

  const Mat& basis() const { return V_; }
  int reduced_dim() const { return static_cast<int>(V_.cols()); }

 private:
  const TwoScaleMesh& mesh_;
  Mat V_;
  const SpMat& M_;
  SourceTerm f_;
  TimeGrid grid_;
  Mat Mr_;
  Eigen::LDLT<Mat> step_fac_;  // M_r + dt A_r
  Eigen::LDLT<Mat> mass_fac_;  // M_r
  Vec Fr_const_;               // cached when f is time-constant
};

}  // namespace msrom
