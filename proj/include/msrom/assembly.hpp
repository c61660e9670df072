#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <memory>
#include <vector>

#include "msrom/field.hpp"
#include "msrom/grid.hpp"

namespace msrom {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using SpatialFn = std::function<double(double, double)>;
using SpaceTimeFn = std::function<double(double, double, double)>;

/// P1 elements on the two triangles of a fine rectangle, split along the
/// SW-NE diagonal. Both triangles share the cell's kappa value, so all
/// element integrals below are exact.
namespace p1 {

/// Vertex offsets (di,dj) from the cell's SW node; both triangles CCW.
inline constexpr int kTriOffset[2][3][2] = {{{0, 0}, {1, 0}, {1, 1}},
                                            {{0, 0}, {1, 1}, {0, 1}}};

struct Kernels {
  double area;            // hx*hy/2, same for both triangles
  double stiff[2][3][3];  // unit-coefficient element stiffness
  double grad[2][3][2];   // P1 basis gradients per triangle
};

Kernels reference_kernels(double hx, double hy);

}  // namespace p1

/// Stiffness over interior fine dofs: A_ij = int kappa grad(g_i).grad(g_j),
/// homogeneous Dirichlet rows/columns eliminated. Exactly symmetric.
SpMat assemble_stiffness(const TwoScaleMesh& mesh, const PermeabilityField& kappa);

/// Mass over interior fine dofs: M_ij = int g_i g_j.
SpMat assemble_mass(const TwoScaleMesh& mesh);

/// Boundary-inclusive mass over all fine nodes (diagnostics: its total sum
/// is |Omega| and row sums are the nodal lumped areas).
SpMat assemble_mass_full(const TwoScaleMesh& mesh);

/// Load vector over interior fine dofs, F_i = int f g_i, 3-point edge
/// midpoint quadrature (exact for quadratic f).
Vec assemble_load(const TwoScaleMesh& mesh, const SpatialFn& f);

/// int f^2 over the domain by the same quadrature; sqrt gives ||f||_L2.
double l2_norm_of_function(const TwoScaleMesh& mesh, const SpatialFn& f);

/// Stiffness over all nodes of a cell block, block-local ordering, no
/// boundary elimination (local neighborhood integrals need the boundary rows).
SpMat assemble_block_stiffness(const TwoScaleMesh& mesh,
                               const PermeabilityField& kappa,
                               const CellBlock& block);

/// Weighted mass over all nodes of a cell block. The weight is constant per
/// triangle, indexed 2*cell + tri with global cell ids.
SpMat assemble_block_weighted_mass(const TwoScaleMesh& mesh, const CellBlock& block,
                                   const std::vector<double>& tri_weight);

double energy_norm(const SpMat& A, const Vec& v);
double l2_norm(const SpMat& M, const Vec& v);

/// 1/lambda_min of A v = lambda M v by inverse iteration, converged to
/// relative tolerance rtol and inflated by a few rtol so that
/// ||v||_L2^2 <= Q ||v||_a^2 is guaranteed for every discrete v.
double estimate_poincare_Q(const SpMat& A, const SpMat& M, double rtol = 1e-8);

/// Symmetric positive definite solver: sparse LDLT up to direct_max_dim
/// unknowns, Jacobi-preconditioned CG beyond. Every solve is residual-checked.
class SymmetricSolver {
 public:
  struct Options {
    int direct_max_dim = 200000;
    double cg_tol = 1e-10;
    int cg_max_iter = 20000;
    double residual_rtol = 1e-8;
  };

  explicit SymmetricSolver(const SpMat& S);
  SymmetricSolver(const SpMat& S, Options opt);
  ~SymmetricSolver();
  SymmetricSolver(SymmetricSolver&&) noexcept;
  SymmetricSolver& operator=(SymmetricSolver&&) noexcept;

  Vec solve(const Vec& rhs) const;
  int dim() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace msrom
