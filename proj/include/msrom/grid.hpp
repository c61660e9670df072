#pragma once

#include <array>
#include <vector>

#include "msrom/errors.hpp"

namespace msrom {

/// Axis-aligned rectangle [0,lx] x [0,ly].
struct Domain {
  double lx = 1.0;
  double ly = 1.0;
};

/// Rectangular block of fine cells [ci0,ci1) x [cj0,cj1). Local node order
/// is row-major over the (ncx+1) x (ncy+1) covered fine nodes.
struct CellBlock {
  int ci0 = 0, cj0 = 0, ci1 = 0, cj1 = 0;

  int ncx() const { return ci1 - ci0; }
  int ncy() const { return cj1 - cj0; }
  int num_cells() const { return ncx() * ncy(); }
  int num_nodes() const { return (ncx() + 1) * (ncy() + 1); }
  int local_node(int li, int lj) const { return lj * (ncx() + 1) + li; }
  bool on_perimeter(int li, int lj) const {
    return li == 0 || lj == 0 || li == ncx() || lj == ncy();
  }
};

/// Structured fine grid with a nested coarse partition. Each coarse element
/// is an exact union of fine cells; indexing is row-major throughout and
/// fixes all matrix layouts downstream. Immutable after construction.
class TwoScaleMesh {
 public:
  TwoScaleMesh(Domain domain, int nx, int ny, int coarse_nx, int coarse_ny);

  const Domain& domain() const { return domain_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int coarse_nx() const { return NX_; }
  int coarse_ny() const { return NY_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double coarse_hx() const { return Hx_; }
  double coarse_hy() const { return Hy_; }
  /// Fine cells per coarse element, per axis.
  int ratio_x() const { return rx_; }
  int ratio_y() const { return ry_; }

  int num_cells() const { return nx_ * ny_; }
  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int num_coarse_elements() const { return NX_ * NY_; }
  int num_interior_coarse_nodes() const { return (NX_ - 1) * (NY_ - 1); }

  int cell_index(int ci, int cj) const { return cj * nx_ + ci; }
  int node_index(int i, int j) const { return j * (nx_ + 1) + i; }
  double node_x(int node) const { return (node % (nx_ + 1)) * hx_; }
  double node_y(int node) const { return (node / (nx_ + 1)) * hy_; }

  bool node_on_boundary(int node) const {
    const int i = node % (nx_ + 1), j = node / (nx_ + 1);
    return i == 0 || j == 0 || i == nx_ || j == ny_;
  }

  /// Dirichlet-eliminated dof numbering: interior nodes only, row-major.
  int num_interior_nodes() const { return (nx_ - 1) * (ny_ - 1); }
  int interior_index(int node) const {
    const int i = node % (nx_ + 1), j = node / (nx_ + 1);
    if (i <= 0 || j <= 0 || i >= nx_ || j >= ny_) return -1;
    return (j - 1) * (nx_ - 1) + (i - 1);
  }
  int interior_to_node(int dof) const {
    const int i = dof % (nx_ - 1) + 1, j = dof / (nx_ - 1) + 1;
    return node_index(i, j);
  }

  int coarse_element_of_cell(int cell) const {
    const int ci = cell % nx_, cj = cell / nx_;
    return (cj / ry_) * NX_ + (ci / rx_);
  }
  /// Fine cells of coarse element E, row-major.
  std::vector<int> cells_of_coarse_element(int E) const;
  CellBlock coarse_element_block(int E) const;

  /// Interior coarse node k (0-based, row-major over the (NX-1) x (NY-1)
  /// interior lattice) in coarse-node coordinates (I,J), 1 <= I <= NX-1.
  std::array<int, 2> interior_coarse_node(int k) const {
    const int I = k % (NX_ - 1) + 1, J = k / (NX_ - 1) + 1;
    return {I, J};
  }
  /// Fine-node index of interior coarse node k.
  int interior_coarse_node_fine_node(int k) const {
    const auto [I, J] = interior_coarse_node(k);
    return node_index(I * rx_, J * ry_);
  }

 private:
  Domain domain_;
  int nx_, ny_, NX_, NY_, rx_, ry_;
  double hx_, hy_, Hx_, Hy_;
};

/// Union of the (always 4, on a structured grid) coarse elements sharing an
/// interior coarse node; the support of every local construction.
struct CoarseNeighborhood {
  int index = 0;                       // interior coarse node, 0-based
  std::vector<int> coarse_elements;    // ascending
  CellBlock block;                     // 2*rx x 2*ry fine cells
  std::vector<int> all_nodes;          // global fine-node ids, block order
  std::vector<int> boundary_nodes;     // on the block perimeter; |.| = L
  std::vector<int> interior_nodes;     // strictly inside the block

  int boundary_count() const { return static_cast<int>(boundary_nodes.size()); }
};

TwoScaleMesh build_two_scale_mesh(Domain domain, int nx, int ny, int coarse_nx,
                                  int coarse_ny);

CoarseNeighborhood neighborhood_of(const TwoScaleMesh& mesh, int k);

}  // namespace msrom
