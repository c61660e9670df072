#include "msrom/kle.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "msrom/errors.hpp"
#include "msrom/rng.hpp"
#include "msrom/util.hpp"

namespace msrom {

void CovarianceSpec::validate() const {
  if (!(sigma2 >= 0.0)) throw ConfigError("kle: sigma2 must be >= 0");
  if (!(eta1 > 0.0) || !(eta2 > 0.0))
    throw ConfigError("kle: correlation lengths must be > 0");
}

double CovarianceSpec::operator()(double x1, double y1, double x2, double y2) const {
  const double dx = x1 - x2, dy = y1 - y2;
  return sigma2 * std::exp(-dx * dx / (eta1 * eta1) - dy * dy / (eta2 * eta2));
}

namespace {

// Clamped bilinear interpolation from build-grid cell centers to a point.
double interp_modes(const Mat& modes, int col, int bnx, int bny, double ax,
                    double ay, double x, double y) {
  double u = x / ax - 0.5, v = y / ay - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(bnx - 1));
  v = std::clamp(v, 0.0, static_cast<double>(bny - 1));
  const int i0 = std::min(static_cast<int>(u), bnx - 2);
  const int j0 = std::min(static_cast<int>(v), bny - 2);
  const double fu = u - i0, fv = v - j0;
  auto m = [&](int i, int j) { return modes(j * bnx + i, col); };
  return (1 - fu) * (1 - fv) * m(i0, j0) + fu * (1 - fv) * m(i0 + 1, j0) +
         (1 - fu) * fv * m(i0, j0 + 1) + fu * fv * m(i0 + 1, j0 + 1);
}

}  // namespace

KleModel build_kle(const TwoScaleMesh& mesh, const Vec& mean_log,
                   const CovarianceSpec& spec, const KleBuildOptions& opt) {
  spec.validate();
  if (mean_log.size() != mesh.num_cells())
    throw ConfigError("kle: mean log-field must have one value per fine cell");

  KleModel kle;
  kle.nx = mesh.nx();
  kle.ny = mesh.ny();
  kle.mean_log = mean_log;
  kle.spec = spec;

  const bool on_fine = mesh.num_cells() <= opt.dense_limit;
  kle.build_nx = on_fine ? mesh.nx() : opt.aux_nx;
  kle.build_ny = on_fine ? mesh.ny() : opt.aux_ny;
  const int nb = kle.build_nx * kle.build_ny;
  if (nb > std::max(opt.dense_limit, opt.aux_nx * opt.aux_ny))
    throw ConfigError("kle: eigenproblem of " + std::to_string(nb) +
                      " points exceeds the dense limit; configure a coarser "
                      "auxiliary KLE grid");
  const double ax = mesh.domain().lx / kle.build_nx;
  const double ay = mesh.domain().ly / kle.build_ny;
  kle.build_cell_area = ax * ay;

  // Nystrom: C W f = lambda f symmetrized to (sqrt(W) C sqrt(W)) g = lambda g
  // with uniform weights W = area * I, so B = area * C and f = g / sqrt(area).
  Mat B(nb, nb);
  for (int j = 0; j < nb; ++j) {
    const double xj = (j % kle.build_nx + 0.5) * ax;
    const double yj = (j / kle.build_nx + 0.5) * ay;
    for (int i = j; i < nb; ++i) {
      const double xi = (i % kle.build_nx + 0.5) * ax;
      const double yi = (i / kle.build_nx + 0.5) * ay;
      const double c = kle.build_cell_area * spec(xi, yi, xj, yj);
      B(i, j) = c;
      B(j, i) = c;
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(B);
  if (es.info() != Eigen::Success) throw NumericalError("kle: eigensolver failed");

  kle.discrete_trace = 0.0;
  for (int i = 0; i < nb; ++i) kle.discrete_trace += std::max(es.eigenvalues()[i], 0.0);

  // Descending positive part, truncated.
  int N;
  if (opt.truncation.fixed_modes > 0) {
    N = std::min(opt.truncation.fixed_modes, nb);
  } else if (kle.discrete_trace <= 0.0) {
    N = 0;
  } else {
    N = 0;
    double acc = 0.0;
    while (N < std::min(opt.truncation.max_modes, nb)) {
      acc += std::max(es.eigenvalues()[nb - 1 - N], 0.0);
      ++N;
      if (acc >= opt.truncation.energy_fraction * kle.discrete_trace) break;
    }
  }

  kle.eigenvalues.resize(N);
  kle.modes_build.resize(nb, N);
  const double inv_sqrt_area = 1.0 / std::sqrt(kle.build_cell_area);
  for (int k = 0; k < N; ++k) {
    kle.eigenvalues[k] = std::max(es.eigenvalues()[nb - 1 - k], 0.0);
    Vec g = es.eigenvectors().col(nb - 1 - k);
    int arg = 0;
    for (int i = 1; i < nb; ++i)
      if (std::abs(g[i]) > std::abs(g[arg])) arg = i;
    if (g[arg] < 0.0) g = -g;
    kle.modes_build.col(k) = g * inv_sqrt_area;
  }

  if (on_fine) {
    kle.modes_fine = kle.modes_build;
  } else {
    kle.modes_fine.resize(mesh.num_cells(), N);
    for (int cell = 0; cell < mesh.num_cells(); ++cell) {
      const double x = (cell % mesh.nx() + 0.5) * mesh.hx();
      const double y = (cell / mesh.nx() + 0.5) * mesh.hy();
      for (int k = 0; k < N; ++k)
        kle.modes_fine(cell, k) =
            interp_modes(kle.modes_build, k, kle.build_nx, kle.build_ny, ax, ay, x, y);
    }
  }
  return kle;
}

SampleDraw make_draw(const KleModel& kle, std::uint64_t base_seed,
                     std::uint64_t stream) {
  NormalSampler sampler(derive_seed(base_seed, stream));
  SampleDraw draw;
  draw.stream = stream;
  draw.xi = sampler.draw(kle.num_modes());
  return draw;
}

PermeabilityField sample_field(const KleModel& kle, const SampleDraw& draw) {
  if (static_cast<int>(draw.xi.size()) != kle.num_modes())
    throw ConfigError("kle: draw length " + std::to_string(draw.xi.size()) +
                      " does not match truncation " + std::to_string(kle.num_modes()));
  const int ncells = kle.nx * kle.ny;
  std::vector<double> values(static_cast<std::size_t>(ncells));
  Vec y = kle.mean_log;
  for (int k = 0; k < kle.num_modes(); ++k)
    y += (draw.xi[k] * std::sqrt(kle.eigenvalues[k])) * kle.modes_fine.col(k);
  for (int c = 0; c < ncells; ++c) values[c] = std::exp(y[c]);
  return PermeabilityField(kle.nx, kle.ny, std::move(values));
}

double truncated_covariance(const KleModel& kle, int cell_a, int cell_b) {
  double sum = 0.0;
  for (int k = 0; k < kle.num_modes(); ++k)
    sum += kle.eigenvalues[k] * kle.modes_fine(cell_a, k) * kle.modes_fine(cell_b, k);
  return sum;
}

void save_kle(const KleModel& kle, const std::string& dir) {
  nlohmann::json j;
  j["schema_version"] = "msrom-kle v1";
  j["nx"] = kle.nx;
  j["ny"] = kle.ny;
  j["build_nx"] = kle.build_nx;
  j["build_ny"] = kle.build_ny;
  j["build_cell_area"] = kle.build_cell_area;
  j["sigma2"] = kle.spec.sigma2;
  j["eta1"] = kle.spec.eta1;
  j["eta2"] = kle.spec.eta2;
  j["discrete_trace"] = kle.discrete_trace;
  j["eigenvalues"] = std::vector<double>(kle.eigenvalues.data(),
                                         kle.eigenvalues.data() + kle.eigenvalues.size());
  std::ofstream out(dir + "/kle.json");
  if (!out) throw IoError("cannot write " + dir + "/kle.json");
  out << j.dump(2) << '\n';

  std::vector<RasterRecord> records;
  records.push_back(RasterRecord{
      kle.nx, kle.ny,
      std::vector<double>(kle.mean_log.data(), kle.mean_log.data() + kle.mean_log.size())});
  write_raster_records(dir + "/kle_mean.field", records);
  records.clear();
  for (int k = 0; k < kle.num_modes(); ++k) {
    const Vec col = kle.modes_fine.col(k);
    records.push_back(RasterRecord{kle.nx, kle.ny,
                                   std::vector<double>(col.data(), col.data() + col.size())});
  }
  if (!records.empty()) write_raster_records(dir + "/kle_modes.field", records);
}

KleModel load_kle(const std::string& dir, const TwoScaleMesh& mesh) {
  std::ifstream in(dir + "/kle.json");
  if (!in) throw IoError("cannot open " + dir + "/kle.json");
  nlohmann::json j;
  in >> j;
  if (j.value("schema_version", "") != std::string("msrom-kle v1"))
    throw IoError(dir + "/kle.json: unexpected schema version");
  KleModel kle;
  kle.nx = j.at("nx").get<int>();
  kle.ny = j.at("ny").get<int>();
  if (kle.nx != mesh.nx() || kle.ny != mesh.ny())
    throw ConfigError(dir + ": KLE model grid " + std::to_string(kle.nx) + "x" +
                      std::to_string(kle.ny) + " does not match the fine mesh");
  kle.build_nx = j.at("build_nx").get<int>();
  kle.build_ny = j.at("build_ny").get<int>();
  kle.build_cell_area = j.at("build_cell_area").get<double>();
  kle.spec.sigma2 = j.at("sigma2").get<double>();
  kle.spec.eta1 = j.at("eta1").get<double>();
  kle.spec.eta2 = j.at("eta2").get<double>();
  kle.discrete_trace = j.at("discrete_trace").get<double>();
  const auto eigs = j.at("eigenvalues").get<std::vector<double>>();
  kle.eigenvalues = Eigen::Map<const Vec>(eigs.data(), static_cast<Eigen::Index>(eigs.size()));

  const auto mean = read_raster_records(dir + "/kle_mean.field");
  kle.mean_log = Eigen::Map<const Vec>(mean.front().values.data(),
                                       static_cast<Eigen::Index>(mean.front().values.size()));
  const int N = kle.num_modes();
  kle.modes_fine.resize(kle.nx * kle.ny, N);
  if (N > 0) {
    const auto modes = read_raster_records(dir + "/kle_modes.field");
    if (static_cast<int>(modes.size()) != N)
      throw IoError(dir + "/kle_modes.field: expected " + std::to_string(N) + " records");
    for (int k = 0; k < N; ++k)
      kle.modes_fine.col(k) = Eigen::Map<const Vec>(
          modes[k].values.data(), static_cast<Eigen::Index>(modes[k].values.size()));
  }
  // Reloaded models sample on the fine grid; build-grid modes are not kept.
  kle.modes_build = kle.modes_fine;
  return kle;
}

}  // namespace msrom
