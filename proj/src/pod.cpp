#include "msrom/pod.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "msrom/errors.hpp"

namespace msrom {

SnapshotBank build_snapshot_bank(const std::vector<Trajectory>& trajectories,
                                 const std::vector<int>& sample_ids, double Q) {
  if (trajectories.empty()) throw ConfigError("snapshot bank: no trajectories");
  if (sample_ids.size() != trajectories.size())
    throw ConfigError("snapshot bank: one sample id per trajectory required");
  const TimeGrid grid = trajectories.front().grid;
  int total = 0;
  for (const auto& t : trajectories) {
    if (t.grid.dt != grid.dt || t.grid.steps != grid.steps)
      throw ConfigError("snapshot bank: trajectories use mismatched time grids");
    total += t.grid.steps;
  }
  SnapshotBank bank;
  bank.dt = grid.dt;
  bank.poincare_q = Q;
  const int m = static_cast<int>(trajectories.front().states.rows());
  bank.states.resize(m, total);
  bank.quotients.resize(m, total);
  bank.sample_ids.reserve(total);
  int col = 0;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& traj = trajectories[k];
    for (int j = 1; j <= grid.steps; ++j, ++col) {
      bank.states.col(col) = traj.states.col(j);
      bank.quotients.col(col) =
          (traj.states.col(j) - traj.states.col(j - 1)) / grid.dt;
      bank.sample_ids.push_back(sample_ids[k]);
    }
  }
  return bank;
}

double PodSpace::tail_sum(int from) const {
  double sum = 0.0;
  for (int p = from; p < eigenvalues.size(); ++p) sum += eigenvalues[p];
  return sum;
}

namespace {

// Cols up to which the Gram eigenproblem runs in extended precision. The POD
// error identity is checked at 1e-8 relative accuracy against tiny eigenvalue
// tails, which double-precision eigensolves of the Gram matrix cannot always
// deliver.
constexpr int kExtendedPrecisionMaxCols = 600;

template <typename Scalar>
PodSpace compute_pod_impl(const SnapshotBank& bank, const SpMat& A, int l) {
  using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int m = static_cast<int>(bank.states.rows());
  const int n = bank.columns();
  MatT Z(m, 2 * n);
  Z.leftCols(n) = bank.states.template cast<Scalar>();
  Z.rightCols(n) = (bank.poincare_q * bank.quotients).template cast<Scalar>();

  Eigen::SparseMatrix<Scalar> As = A.template cast<Scalar>();
  const MatT AZ = As * Z;
  const MatT G = Z.transpose() * AZ;

  Eigen::SelfAdjointEigenSolver<MatT> es(G);
  if (es.info() != Eigen::Success) throw NumericalError("pod: eigensolver failed");

  PodSpace pod;
  pod.poincare_q = bank.poincare_q;
  pod.l = l;
  const int cols = 2 * n;
  pod.eigenvalues.resize(cols);
  for (int k = 0; k < cols; ++k)
    pod.eigenvalues[k] =
        std::max(static_cast<double>(es.eigenvalues()[cols - 1 - k]), 0.0);

  if (l < 1 || l > cols)
    throw ConfigError("pod: l = " + std::to_string(l) + " outside [1, " +
                      std::to_string(cols) + "]");
  if (!(pod.eigenvalues[l - 1] > 1e-12 * pod.eigenvalues[0]))
    throw NumericalError("pod: l = " + std::to_string(l) +
                         " exceeds the numerical rank of the snapshot bank");

  pod.basis.resize(m, l);
  for (int k = 0; k < l; ++k) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = es.eigenvectors().col(cols - 1 - k);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> phi = Z * w;
    // A-normalization: ||Z w||_A = sqrt(lambda) for unit w.
    phi /= std::sqrt(static_cast<Scalar>(es.eigenvalues()[cols - 1 - k]));
    int arg = 0;
    for (int i = 1; i < m; ++i)
      if (std::abs(static_cast<double>(phi[i])) > std::abs(static_cast<double>(phi[arg])))
        arg = i;
    if (phi[arg] < Scalar(0)) phi = -phi;
    pod.basis.col(k) = phi.template cast<double>();
  }
  return pod;
}

}  // namespace

PodSpace compute_pod(const SnapshotBank& bank, const SpMat& A, int l) {
  if (2 * bank.columns() <= kExtendedPrecisionMaxCols)
    return compute_pod_impl<long double>(bank, A, l);
  return compute_pod_impl<double>(bank, A, l);
}

Vec pod_project(const PodSpace& pod, const SpMat& A, const Vec& y) {
  return pod.basis * (pod.basis.transpose() * (A * y));
}

}  // namespace msrom
