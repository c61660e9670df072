#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msrom/assembly.hpp"
#include "msrom/field.hpp"
#include "msrom/grid.hpp"

namespace msrom {

/// Two-point covariance of the log-permeability Y:
///   C(x,z) = sigma2 * exp(-|x1-z1|^2/eta1^2 - |x2-z2|^2/eta2^2).
struct CovarianceSpec {
  double sigma2 = 1.0;
  double eta1 = 0.5;
  double eta2 = 0.5;

  void validate() const;
  double operator()(double x1, double y1, double x2, double y2) const;
};

struct TruncationRule {
  int fixed_modes = 0;           // > 0: keep exactly this many
  double energy_fraction = 0.95;
  int max_modes = 100;
};

/// Truncated eigenpairs of the log-permeability covariance plus the mean
/// log-field. The eigenproblem is assembled at cell centers of a build grid
/// (the fine grid when small enough, else a coarser auxiliary grid) via a
/// Nystrom discretization; modes are kept on the build grid, where they are
/// orthonormal under the area-weighted inner product, and interpolated to
/// fine cells for sampling.
struct KleModel {
  int nx = 0, ny = 0;          // fine cell grid
  int build_nx = 0, build_ny = 0;
  double build_cell_area = 0.0;
  Vec mean_log;                // per fine cell
  Vec eigenvalues;             // descending, clamped at 0
  Mat modes_build;             // build cells x N
  Mat modes_fine;              // fine cells x N
  double discrete_trace = 0.0; // sum of all Nystrom eigenvalues
  CovarianceSpec spec;

  int num_modes() const { return static_cast<int>(eigenvalues.size()); }
};

struct SampleDraw {
  std::vector<double> xi;   // standard normal, iid
  std::uint64_t stream = 0;
};

struct KleBuildOptions {
  TruncationRule truncation;
  int dense_limit = 3600;  // build on the fine grid up to this many cells
  int aux_nx = 60;         // auxiliary grid beyond the limit
  int aux_ny = 60;
};

KleModel build_kle(const TwoScaleMesh& mesh, const Vec& mean_log,
                   const CovarianceSpec& spec, const KleBuildOptions& opt = {});

/// Per-stream draw of the KLE coefficients; identical (base, stream) pairs
/// give bit-identical draws under any schedule.
SampleDraw make_draw(const KleModel& kle, std::uint64_t base_seed,
                     std::uint64_t stream);

/// kappa(cell) = exp(mean_log + sum_i xi_i sqrt(lambda_i) f_i), positive by
/// construction.
PermeabilityField sample_field(const KleModel& kle, const SampleDraw& draw);

/// Truncated covariance sum_i lambda_i f_i(x) f_i(z) between two fine cells.
double truncated_covariance(const KleModel& kle, int cell_a, int cell_b);

void save_kle(const KleModel& kle, const std::string& dir);
KleModel load_kle(const std::string& dir, const TwoScaleMesh& mesh);

}  // namespace msrom
