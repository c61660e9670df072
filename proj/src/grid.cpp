#include "msrom/grid.hpp"

#include <string>

namespace msrom {

TwoScaleMesh::TwoScaleMesh(Domain domain, int nx, int ny, int coarse_nx,
                           int coarse_ny)
    : domain_(domain), nx_(nx), ny_(ny), NX_(coarse_nx), NY_(coarse_ny) {
  if (nx_ < 2 || ny_ < 2 || NX_ < 2 || NY_ < 2)
    throw ConfigError("mesh: all cell counts must be >= 2, got nx=" +
                      std::to_string(nx_) + " ny=" + std::to_string(ny_) +
                      " NX=" + std::to_string(NX_) + " NY=" + std::to_string(NY_));
  if (nx_ % NX_ != 0)
    throw ConfigError("mesh: nx=" + std::to_string(nx_) +
                      " not divisible by NX=" + std::to_string(NX_));
  if (ny_ % NY_ != 0)
    throw ConfigError("mesh: ny=" + std::to_string(ny_) +
                      " not divisible by NY=" + std::to_string(NY_));
  if (!(domain_.lx > 0.0) || !(domain_.ly > 0.0))
    throw ConfigError("mesh: domain extents must be positive");
  rx_ = nx_ / NX_;
  ry_ = ny_ / NY_;
  hx_ = domain_.lx / nx_;
  hy_ = domain_.ly / ny_;
  Hx_ = domain_.lx / NX_;
  Hy_ = domain_.ly / NY_;
}

std::vector<int> TwoScaleMesh::cells_of_coarse_element(int E) const {
  const CellBlock b = coarse_element_block(E);
  std::vector<int> cells;
  cells.reserve(b.num_cells());
  for (int cj = b.cj0; cj < b.cj1; ++cj)
    for (int ci = b.ci0; ci < b.ci1; ++ci) cells.push_back(cell_index(ci, cj));
  return cells;
}

CellBlock TwoScaleMesh::coarse_element_block(int E) const {
  const int Ci = E % NX_, Cj = E / NX_;
  return CellBlock{Ci * rx_, Cj * ry_, (Ci + 1) * rx_, (Cj + 1) * ry_};
}

TwoScaleMesh build_two_scale_mesh(Domain domain, int nx, int ny, int coarse_nx,
                                  int coarse_ny) {
  return TwoScaleMesh(domain, nx, ny, coarse_nx, coarse_ny);
}

CoarseNeighborhood neighborhood_of(const TwoScaleMesh& mesh, int k) {
  if (k < 0 || k >= mesh.num_interior_coarse_nodes())
    throw ConfigError("neighborhood index " + std::to_string(k) +
                      " out of range [0, " +
                      std::to_string(mesh.num_interior_coarse_nodes()) + ")");
  CoarseNeighborhood nb;
  nb.index = k;
  const auto [I, J] = mesh.interior_coarse_node(k);
  // The 4 coarse elements sharing node (I, J).
  for (int Cj : {J - 1, J})
    for (int Ci : {I - 1, I}) nb.coarse_elements.push_back(Cj * mesh.coarse_nx() + Ci);

  const int rx = mesh.ratio_x(), ry = mesh.ratio_y();
  nb.block = CellBlock{(I - 1) * rx, (J - 1) * ry, (I + 1) * rx, (J + 1) * ry};

  nb.all_nodes.reserve(nb.block.num_nodes());
  for (int lj = 0; lj <= nb.block.ncy(); ++lj)
    for (int li = 0; li <= nb.block.ncx(); ++li) {
      const int node = mesh.node_index(nb.block.ci0 + li, nb.block.cj0 + lj);
      nb.all_nodes.push_back(node);
      if (nb.block.on_perimeter(li, lj))
        nb.boundary_nodes.push_back(node);
      else
        nb.interior_nodes.push_back(node);
    }
  return nb;
}

}  // namespace msrom
