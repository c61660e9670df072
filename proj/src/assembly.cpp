#include "msrom/assembly.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <cmath>
#include <limits>
#include <string>

#include "msrom/errors.hpp"

namespace msrom {

namespace p1 {

Kernels reference_kernels(double hx, double hy) {
  Kernels k;
  k.area = 0.5 * hx * hy;
  for (int t = 0; t < 2; ++t) {
    double px[3], py[3];
    for (int a = 0; a < 3; ++a) {
      px[a] = kTriOffset[t][a][0] * hx;
      py[a] = kTriOffset[t][a][1] * hy;
    }
    const double twoA = 2.0 * k.area;
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      k.grad[t][a][0] = (py[b] - py[c]) / twoA;
      k.grad[t][a][1] = (px[c] - px[b]) / twoA;
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        k.stiff[t][a][b] = k.area * (k.grad[t][a][0] * k.grad[t][b][0] +
                                     k.grad[t][a][1] * k.grad[t][b][1]);
  }
  return k;
}

}  // namespace p1

namespace {

using Triplet = Eigen::Triplet<double>;

// Global node ids of triangle t in cell (ci, cj).
inline void triangle_nodes(const TwoScaleMesh& mesh, int ci, int cj, int t,
                           int out[3]) {
  for (int a = 0; a < 3; ++a)
    out[a] = mesh.node_index(ci + p1::kTriOffset[t][a][0],
                             cj + p1::kTriOffset[t][a][1]);
}

}  // namespace

SpMat assemble_stiffness(const TwoScaleMesh& mesh, const PermeabilityField& kappa) {
  if (kappa.nx() != mesh.nx() || kappa.ny() != mesh.ny())
    throw ConfigError("stiffness: field grid does not match the fine mesh");
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  const int m = mesh.num_interior_nodes();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_cells()) * 18);
  for (int cj = 0; cj < mesh.ny(); ++cj)
    for (int ci = 0; ci < mesh.nx(); ++ci) {
      const double kval = kappa.at(ci, cj);
      for (int t = 0; t < 2; ++t) {
        int n[3];
        triangle_nodes(mesh, ci, cj, t, n);
        int dof[3];
        for (int a = 0; a < 3; ++a) dof[a] = mesh.interior_index(n[a]);
        for (int a = 0; a < 3; ++a) {
          if (dof[a] < 0) continue;
          for (int b = 0; b < 3; ++b) {
            if (dof[b] < 0) continue;
            trip.emplace_back(dof[a], dof[b], kval * ker.stiff[t][a][b]);
          }
        }
      }
    }
  SpMat A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

namespace {

SpMat assemble_mass_impl(const TwoScaleMesh& mesh, bool interior_only) {
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  const int dim = interior_only ? mesh.num_interior_nodes() : mesh.num_nodes();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_cells()) * 18);
  for (int cj = 0; cj < mesh.ny(); ++cj)
    for (int ci = 0; ci < mesh.nx(); ++ci)
      for (int t = 0; t < 2; ++t) {
        int n[3];
        triangle_nodes(mesh, ci, cj, t, n);
        int dof[3];
        for (int a = 0; a < 3; ++a)
          dof[a] = interior_only ? mesh.interior_index(n[a]) : n[a];
        for (int a = 0; a < 3; ++a) {
          if (dof[a] < 0) continue;
          for (int b = 0; b < 3; ++b) {
            if (dof[b] < 0) continue;
            trip.emplace_back(dof[a], dof[b], ker.area / 12.0 * (a == b ? 2.0 : 1.0));
          }
        }
      }
  SpMat M(dim, dim);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

}  // namespace

SpMat assemble_mass(const TwoScaleMesh& mesh) { return assemble_mass_impl(mesh, true); }

SpMat assemble_mass_full(const TwoScaleMesh& mesh) {
  return assemble_mass_impl(mesh, false);
}

Vec assemble_load(const TwoScaleMesh& mesh, const SpatialFn& f) {
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  Vec F = Vec::Zero(mesh.num_interior_nodes());
  for (int cj = 0; cj < mesh.ny(); ++cj)
    for (int ci = 0; ci < mesh.nx(); ++ci)
      for (int t = 0; t < 2; ++t) {
        int n[3];
        triangle_nodes(mesh, ci, cj, t, n);
        double fx[3];  // f at edge midpoints; midpoint e is opposite vertex e
        for (int e = 0; e < 3; ++e) {
          const int a = (e + 1) % 3, b = (e + 2) % 3;
          const double mx = 0.5 * (mesh.node_x(n[a]) + mesh.node_x(n[b]));
          const double my = 0.5 * (mesh.node_y(n[a]) + mesh.node_y(n[b]));
          fx[e] = f(mx, my);
        }
        for (int a = 0; a < 3; ++a) {
          const int dof = mesh.interior_index(n[a]);
          if (dof < 0) continue;
          // basis a is 1/2 at the two midpoints of edges adjacent to a
          F[dof] += ker.area / 3.0 * 0.5 * (fx[(a + 1) % 3] + fx[(a + 2) % 3]);
        }
      }
  return F;
}

double l2_norm_of_function(const TwoScaleMesh& mesh, const SpatialFn& f) {
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  double sum = 0.0;
  for (int cj = 0; cj < mesh.ny(); ++cj)
    for (int ci = 0; ci < mesh.nx(); ++ci)
      for (int t = 0; t < 2; ++t) {
        int n[3];
        triangle_nodes(mesh, ci, cj, t, n);
        for (int e = 0; e < 3; ++e) {
          const int a = (e + 1) % 3, b = (e + 2) % 3;
          const double mx = 0.5 * (mesh.node_x(n[a]) + mesh.node_x(n[b]));
          const double my = 0.5 * (mesh.node_y(n[a]) + mesh.node_y(n[b]));
          const double fv = f(mx, my);
          sum += ker.area / 3.0 * fv * fv;
        }
      }
  return std::sqrt(sum);
}

SpMat assemble_block_stiffness(const TwoScaleMesh& mesh,
                               const PermeabilityField& kappa,
                               const CellBlock& block) {
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  const int nloc = block.num_nodes();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(block.num_cells()) * 18);
  for (int lj = 0; lj < block.ncy(); ++lj)
    for (int li = 0; li < block.ncx(); ++li) {
      const double kval = kappa.at(block.ci0 + li, block.cj0 + lj);
      for (int t = 0; t < 2; ++t)
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            trip.emplace_back(
                block.local_node(li + p1::kTriOffset[t][a][0], lj + p1::kTriOffset[t][a][1]),
                block.local_node(li + p1::kTriOffset[t][b][0], lj + p1::kTriOffset[t][b][1]),
                kval * ker.stiff[t][a][b]);
    }
  SpMat A(nloc, nloc);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

SpMat assemble_block_weighted_mass(const TwoScaleMesh& mesh, const CellBlock& block,
                                   const std::vector<double>& tri_weight) {
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  const int nloc = block.num_nodes();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(block.num_cells()) * 18);
  for (int lj = 0; lj < block.ncy(); ++lj)
    for (int li = 0; li < block.ncx(); ++li) {
      const int cell = mesh.cell_index(block.ci0 + li, block.cj0 + lj);
      for (int t = 0; t < 2; ++t) {
        const double w = tri_weight[2 * cell + t];
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            trip.emplace_back(
                block.local_node(li + p1::kTriOffset[t][a][0], lj + p1::kTriOffset[t][a][1]),
                block.local_node(li + p1::kTriOffset[t][b][0], lj + p1::kTriOffset[t][b][1]),
                w * ker.area / 12.0 * (a == b ? 2.0 : 1.0));
      }
    }
  SpMat M(nloc, nloc);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

double energy_norm(const SpMat& A, const Vec& v) {
  const double q = v.dot(A * v);
  return std::sqrt(std::max(q, 0.0));
}

double l2_norm(const SpMat& M, const Vec& v) {
  const double q = v.dot(M * v);
  return std::sqrt(std::max(q, 0.0));
}

double estimate_poincare_Q(const SpMat& A, const SpMat& M, double rtol) {
  Eigen::SimplicialLDLT<SpMat> fac(A);
  if (fac.info() != Eigen::Success)
    throw NumericalError("poincare: stiffness factorization failed");
  Vec v = Vec::Ones(A.rows());
  v /= l2_norm(M, v);
  double lambda = std::numeric_limits<double>::infinity();
  const int max_iter = 500;
  for (int it = 0; it < max_iter; ++it) {
    Vec w = fac.solve(M * v);
    w /= l2_norm(M, w);
    const double lam = w.dot(A * w);  // Rayleigh quotient, w is M-normalized
    if (std::abs(lam - lambda) <= rtol * lam) {
      // Rayleigh quotients approach lambda_min from above; pad by a few rtol
      // so the returned Q upper-bounds 1/lambda_min.
      return (1.0 + 10.0 * rtol) / lam;
    }
    lambda = lam;
    v = std::move(w);
  }
  throw NumericalError("poincare: inverse iteration did not converge in " +
                       std::to_string(max_iter) + " iterations");
}

struct SymmetricSolver::Impl {
  Options opt;
  int n = 0;
  bool direct = true;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  SpMat S;  // kept for residual checks and the CG path
};

SymmetricSolver::SymmetricSolver(const SpMat& S) : SymmetricSolver(S, Options{}) {}

SymmetricSolver::SymmetricSolver(const SpMat& S, Options opt)
    : impl_(std::make_unique<Impl>()) {
  impl_->opt = opt;
  impl_->n = static_cast<int>(S.rows());
  impl_->S = S;
  impl_->direct = impl_->n <= opt.direct_max_dim;
  if (impl_->direct) {
    impl_->ldlt.compute(S);
    if (impl_->ldlt.info() != Eigen::Success)
      throw NumericalError("symmetric factorization failed (dim " +
                           std::to_string(impl_->n) + ")");
  }
}

SymmetricSolver::~SymmetricSolver() = default;
SymmetricSolver::SymmetricSolver(SymmetricSolver&&) noexcept = default;
SymmetricSolver& SymmetricSolver::operator=(SymmetricSolver&&) noexcept = default;

int SymmetricSolver::dim() const { return impl_->n; }

Vec SymmetricSolver::solve(const Vec& rhs) const {
  Vec x;
  if (impl_->direct) {
    x = impl_->ldlt.solve(rhs);
  } else {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(impl_->opt.cg_tol);
    cg.setMaxIterations(impl_->opt.cg_max_iter);
    cg.compute(impl_->S);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw NumericalError("cg did not converge: " + std::to_string(cg.iterations()) +
                           " iterations, residual " + std::to_string(cg.error()));
  }
  const double rhs_norm = rhs.norm();
  const double res = (impl_->S * x - rhs).norm();
  if (res > impl_->opt.residual_rtol * std::max(rhs_norm, 1e-300))
    throw NumericalError("linear solve residual " + std::to_string(res) +
                         " exceeds tolerance for |rhs| = " + std::to_string(rhs_norm));
  return x;
}

}  // namespace msrom
