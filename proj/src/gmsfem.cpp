#include "msrom/gmsfem.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <string>

#include "msrom/errors.hpp"
#include "msrom/util.hpp"

namespace msrom {

Vec PatchFunction::to_nodes(const TwoScaleMesh& mesh) const {
  Vec out = Vec::Zero(mesh.num_nodes());
  int loc = 0;
  for (int lj = 0; lj <= block.ncy(); ++lj)
    for (int li = 0; li <= block.ncx(); ++li, ++loc)
      out[mesh.node_index(block.ci0 + li, block.cj0 + lj)] = values[loc];
  return out;
}

Vec PatchFunction::to_interior(const TwoScaleMesh& mesh) const {
  Vec out = Vec::Zero(mesh.num_interior_nodes());
  int loc = 0;
  for (int lj = 0; lj <= block.ncy(); ++lj)
    for (int li = 0; li <= block.ncx(); ++li, ++loc) {
      const int dof = mesh.interior_index(mesh.node_index(block.ci0 + li, block.cj0 + lj));
      if (dof >= 0) out[dof] = values[loc];
    }
  return out;
}

void ReducedSpace::append_columns(const Mat& cols, const std::vector<int>& owners) {
  const int old = dim();
  basis.conservativeResize(basis.rows(), old + cols.cols());
  basis.rightCols(cols.cols()) = cols;
  for (std::size_t k = 0; k < owners.size(); ++k) {
    column_owner.push_back(owners[k]);
    enriched_counts.at(owners[k]) += 1;
  }
}

namespace {

// Rows/columns of S restricted by a local index map (-1 drops the node).
SpMat restrict_sparse(const SpMat& S, const std::vector<int>& map, int nsub) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(S.nonZeros());
  for (int col = 0; col < S.outerSize(); ++col) {
    const int cj = map[col];
    if (cj < 0) continue;
    for (SpMat::InnerIterator it(S, col); it; ++it) {
      const int ri = map[it.row()];
      if (ri < 0) continue;
      trip.emplace_back(ri, cj, it.value());
    }
  }
  SpMat out(nsub, nsub);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// Block of S with separate row / column maps (e.g. interior x boundary).
Mat gather_block(const SpMat& S, const std::vector<int>& row_map, int nrows,
                 const std::vector<int>& col_map, int ncols) {
  Mat out = Mat::Zero(nrows, ncols);
  for (int col = 0; col < S.outerSize(); ++col) {
    const int cj = col_map[col];
    if (cj < 0) continue;
    for (SpMat::InnerIterator it(S, col); it; ++it) {
      const int ri = row_map[it.row()];
      if (ri < 0) continue;
      out(ri, cj) += it.value();
    }
  }
  return out;
}

struct LocalMaps {
  std::vector<int> interior_map;  // local node -> interior ordinal or -1
  std::vector<int> boundary_map;  // local node -> boundary ordinal or -1
  std::vector<int> interior_local, boundary_local;
};

LocalMaps split_block_nodes(const CellBlock& block) {
  LocalMaps maps;
  const int nloc = block.num_nodes();
  maps.interior_map.assign(nloc, -1);
  maps.boundary_map.assign(nloc, -1);
  int loc = 0;
  for (int lj = 0; lj <= block.ncy(); ++lj)
    for (int li = 0; li <= block.ncx(); ++li, ++loc) {
      if (block.on_perimeter(li, lj)) {
        maps.boundary_map[loc] = static_cast<int>(maps.boundary_local.size());
        maps.boundary_local.push_back(loc);
      } else {
        maps.interior_map[loc] = static_cast<int>(maps.interior_local.size());
        maps.interior_local.push_back(loc);
      }
    }
  return maps;
}

// Harmonic extension: interior values of solutions with prescribed boundary
// data columns; shares one factorization across all right-hand sides.
Mat harmonic_extend(const SpMat& A_block, const LocalMaps& maps, const Mat& boundary_data,
                    const char* what) {
  const int ni = static_cast<int>(maps.interior_local.size());
  const int nb = static_cast<int>(maps.boundary_local.size());
  const SpMat A_ii = restrict_sparse(A_block, maps.interior_map, ni);
  const Mat A_ib = gather_block(A_block, maps.interior_map, ni, maps.boundary_map, nb);
  Eigen::SimplicialLDLT<SpMat> fac(A_ii);
  if (fac.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": local interior stiffness factorization failed");
  return fac.solve(-(A_ib * boundary_data));
}

}  // namespace

LocalSnapshotSpace compute_snapshots(const TwoScaleMesh& mesh,
                                     const PermeabilityField& kappa,
                                     const CoarseNeighborhood& nb) {
  LocalSnapshotSpace snap;
  snap.index = nb.index;
  snap.block = nb.block;
  const auto maps = split_block_nodes(nb.block);
  snap.boundary_local = maps.boundary_local;
  snap.interior_local = maps.interior_local;
  const int nloc = nb.block.num_nodes();
  const int L = static_cast<int>(maps.boundary_local.size());

  const SpMat A_block = assemble_block_stiffness(mesh, kappa, nb.block);
  const Mat interior = harmonic_extend(A_block, maps, Mat::Identity(L, L), "snapshots");

  snap.columns = Mat::Zero(nloc, L);
  for (int j = 0; j < L; ++j) snap.columns(maps.boundary_local[j], j) = 1.0;
  for (int i = 0; i < static_cast<int>(maps.interior_local.size()); ++i)
    snap.columns.row(maps.interior_local[i]) = interior.row(i);
  return snap;
}

PatchFunction compute_pou(const TwoScaleMesh& mesh, const PermeabilityField& kappa,
                          const CoarseNeighborhood& nb) {
  PatchFunction chi{nb.block, Vec::Zero(nb.block.num_nodes())};
  const auto [I, J] = mesh.interior_coarse_node(nb.index);
  const int rx = mesh.ratio_x(), ry = mesh.ratio_y();
  // Tensor hat of the coarse node in fine-index arithmetic; exact linear
  // decay over one coarse element per axis.
  auto hat = [&](int gi, int gj) {
    const double fx = 1.0 - std::abs(gi - I * rx) / static_cast<double>(rx);
    const double fy = 1.0 - std::abs(gj - J * ry) / static_cast<double>(ry);
    return std::max(fx, 0.0) * std::max(fy, 0.0);
  };

  for (int E : nb.coarse_elements) {
    const CellBlock eb = mesh.coarse_element_block(E);
    const auto maps = split_block_nodes(eb);
    const int nbnd = static_cast<int>(maps.boundary_local.size());
    Vec bdata(nbnd);
    for (int b = 0; b < nbnd; ++b) {
      const int loc = maps.boundary_local[b];
      const int gi = eb.ci0 + loc % (eb.ncx() + 1);
      const int gj = eb.cj0 + loc / (eb.ncx() + 1);
      bdata[b] = hat(gi, gj);
    }
    const SpMat A_block = assemble_block_stiffness(mesh, kappa, eb);
    const Mat interior = harmonic_extend(A_block, maps, bdata, "pou");

    // Scatter K-local values into the neighborhood patch. Shared edges get
    // identical boundary data from both elements.
    auto put = [&](int loc, double v) {
      const int gi = eb.ci0 + loc % (eb.ncx() + 1);
      const int gj = eb.cj0 + loc / (eb.ncx() + 1);
      chi.values[nb.block.local_node(gi - nb.block.ci0, gj - nb.block.cj0)] = v;
    };
    for (int b = 0; b < nbnd; ++b) put(maps.boundary_local[b], bdata[b]);
    for (int i = 0; i < static_cast<int>(maps.interior_local.size()); ++i)
      put(maps.interior_local[i], interior(i, 0));
  }
  return chi;
}

PartitionOfUnity compute_partition_of_unity(const TwoScaleMesh& mesh,
                                            const PermeabilityField& kappa,
                                            int workers) {
  PartitionOfUnity pou;
  pou.chi.resize(mesh.num_interior_coarse_nodes());
  parallel_for(mesh.num_interior_coarse_nodes(), workers, [&](int k) {
    pou.chi[k] = compute_pou(mesh, kappa, neighborhood_of(mesh, k));
  });
  return pou;
}

std::vector<double> kappa_hat_weights(const TwoScaleMesh& mesh,
                                      const PermeabilityField& kappa,
                                      const PartitionOfUnity& pou) {
  const auto ker = p1::reference_kernels(mesh.hx(), mesh.hy());
  std::vector<double> w(static_cast<std::size_t>(2 * mesh.num_cells()), 0.0);
  for (const auto& chi : pou.chi) {
    const CellBlock& b = chi.block;
    for (int lj = 0; lj < b.ncy(); ++lj)
      for (int li = 0; li < b.ncx(); ++li) {
        const int cell = mesh.cell_index(b.ci0 + li, b.cj0 + lj);
        for (int t = 0; t < 2; ++t) {
          double gx = 0.0, gy = 0.0;
          for (int a = 0; a < 3; ++a) {
            const double v = chi.values[b.local_node(li + p1::kTriOffset[t][a][0],
                                                     lj + p1::kTriOffset[t][a][1])];
            gx += v * ker.grad[t][a][0];
            gy += v * ker.grad[t][a][1];
          }
          w[2 * cell + t] += gx * gx + gy * gy;
        }
      }
  }
  const double H2 = mesh.coarse_hx() * mesh.coarse_hx() +
                    mesh.coarse_hy() * mesh.coarse_hy();
  for (int cj = 0; cj < mesh.ny(); ++cj)
    for (int ci = 0; ci < mesh.nx(); ++ci) {
      const int cell = mesh.cell_index(ci, cj);
      w[2 * cell] *= H2 * kappa.at(ci, cj);
      w[2 * cell + 1] *= H2 * kappa.at(ci, cj);
    }
  return w;
}

SpectralSelection spectral_select(const TwoScaleMesh& mesh,
                                  const PermeabilityField& kappa,
                                  const LocalSnapshotSpace& snapshots,
                                  const PatchFunction& chi,
                                  const std::vector<double>& kappa_hat_tri, int l) {
  const int L = snapshots.count();
  if (l > L)
    throw ConfigError("spectral_select: requested " + std::to_string(l) +
                      " basis functions but neighborhood " +
                      std::to_string(snapshots.index) + " has only " +
                      std::to_string(L) + " snapshots");
  const SpMat A_block = assemble_block_stiffness(mesh, kappa, snapshots.block);
  const SpMat Mhat = assemble_block_weighted_mass(mesh, snapshots.block, kappa_hat_tri);

  const Mat Sa = snapshots.columns.transpose() * (A_block * snapshots.columns);
  const Mat Sm = snapshots.columns.transpose() * (Mhat * snapshots.columns);

  // kappa_hat vanishes on domain-corner triangles cut off by the diagonal,
  // so boundary-delta snapshots at those corners give Sm a numerical null
  // space. Deflate it and solve the pencil on the kappa_hat-positive range:
  // with T whitening Sm there, T^T Sa T keeps the finite eigenvalues and the
  // returned eigenvectors stay kappa_hat-orthonormal.
  Eigen::SelfAdjointEigenSolver<Mat> em(Sm);
  if (em.info() != Eigen::Success || !(em.eigenvalues()[L - 1] > 0.0))
    throw NumericalError("spectral_select: kappa-hat mass matrix singular in neighborhood " +
                         std::to_string(snapshots.index));
  const double dmax = em.eigenvalues()[L - 1];
  int rank = 0;
  for (int i = 0; i < L; ++i)
    if (em.eigenvalues()[i] > 1e-12 * dmax) ++rank;
  if (l > rank)
    throw NumericalError("spectral_select: kappa-hat mass rank " + std::to_string(rank) +
                         " < requested " + std::to_string(l) + " in neighborhood " +
                         std::to_string(snapshots.index));
  Mat T(L, rank);
  for (int r = 0; r < rank; ++r) {
    const int i = L - rank + r;  // ascending order: positive part is the tail
    T.col(r) = em.eigenvectors().col(i) / std::sqrt(em.eigenvalues()[i]);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(T.transpose() * Sa * T));
  if (es.info() != Eigen::Success)
    throw NumericalError("spectral_select: eigensolver failed in neighborhood " +
                         std::to_string(snapshots.index));

  SpectralSelection sel;
  sel.eigenvalues = es.eigenvalues();  // ascending, one per retained direction
  sel.local_basis.resize(snapshots.block.num_nodes(), l);
  sel.snapshot_coeffs.resize(L, l);
  for (int j = 0; j < l; ++j) {
    Vec w = T * es.eigenvectors().col(j);
    Vec phi = snapshots.columns * w;
    int arg = 0;
    double best = std::abs(phi[0]);
    for (int i = 1; i < phi.size(); ++i)
      if (std::abs(phi[i]) > best) {
        best = std::abs(phi[i]);
        arg = i;
      }
    if (phi[arg] < 0.0) {
      phi = -phi;
      w = -w;
    }
    sel.snapshot_coeffs.col(j) = w;
    sel.local_basis.col(j) = phi.cwiseProduct(chi.values);
  }
  return sel;
}

ReducedSpace assemble_multiscale_space(const TwoScaleMesh& mesh,
                                       const PermeabilityField& kappa,
                                       const SpMat& A,
                                       const std::vector<int>& counts,
                                       int workers) {
  const int N = mesh.num_interior_coarse_nodes();
  if (static_cast<int>(counts.size()) != N)
    throw ConfigError("assemble_multiscale_space: need one basis count per neighborhood");

  const PartitionOfUnity pou = compute_partition_of_unity(mesh, kappa, workers);
  const auto what = kappa_hat_weights(mesh, kappa, pou);

  std::vector<SpectralSelection> selections(N);
  std::vector<CoarseNeighborhood> nbs(N);
  parallel_for(N, workers, [&](int k) {
    nbs[k] = neighborhood_of(mesh, k);
    const auto snap = compute_snapshots(mesh, kappa, nbs[k]);
    selections[k] = spectral_select(mesh, kappa, snap, pou.chi[k], what, counts[k]);
  });

  ReducedSpace space;
  space.stage1_counts = counts;
  space.enriched_counts.assign(N, 0);
  int M = 0;
  for (int k = 0; k < N; ++k) M += counts[k];
  space.basis.resize(mesh.num_interior_nodes(), M);
  int col = 0;
  bool lambda_defined = true;
  double lambda = std::numeric_limits<double>::infinity();
  for (int k = 0; k < N; ++k) {
    space.node_eigenvalues.push_back(selections[k].eigenvalues);
    if (counts[k] < selections[k].eigenvalues.size())
      lambda = std::min(lambda, selections[k].eigenvalues[counts[k]]);
    else
      lambda_defined = false;
    for (int j = 0; j < counts[k]; ++j, ++col) {
      PatchFunction fn{nbs[k].block, selections[k].local_basis.col(j)};
      space.basis.col(col) = fn.to_interior(mesh);
      space.column_owner.push_back(k);
    }
  }
  if (lambda_defined) space.lambda = lambda;

  // Gram sanity check; a dependent local family would poison every coarse
  // solve downstream, so identify the culprit now.
  Eigen::LDLT<Mat> gram(Mat(space.basis.transpose() * (A * space.basis)));
  if (gram.info() != Eigen::Success || !gram.isPositive()) {
    for (int k = 0; k < N; ++k) {
      std::vector<int> cols;
      for (int c = 0; c < space.dim(); ++c)
        if (space.column_owner[c] == k) cols.push_back(c);
      Mat Vk(space.basis.rows(), cols.size());
      for (std::size_t c = 0; c < cols.size(); ++c) Vk.col(c) = space.basis.col(cols[c]);
      Eigen::LDLT<Mat> g(Mat(Vk.transpose() * (A * Vk)));
      if (g.info() != Eigen::Success || !g.isPositive())
        throw NumericalError("multiscale space: rank-deficient basis in neighborhood " +
                             std::to_string(k));
    }
    throw NumericalError("multiscale space: rank-deficient basis (global Gram)");
  }
  return space;
}

}  // namespace msrom
