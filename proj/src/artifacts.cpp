#include "msrom/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "msrom/errors.hpp"
#include "msrom/field.hpp"

namespace msrom {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

void write_errors_csv(const std::string& path, const ErrorReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# msrom-errors v1\n";
  out << "step,sample_id,t,e_a,e_l2\n";
  for (const auto& curve : report.curves)
    for (std::size_t n = 0; n < curve.times.size(); ++n)
      out << curve.step << ',' << curve.sample_id << ',' << fmt(curve.times[n]) << ','
          << fmt(curve.e_a[n]) << ',' << fmt(curve.e_l2[n]) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ErrorCurve> read_errors_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# msrom-errors", 0) != 0)
    throw IoError(path + ": missing msrom-errors schema line");
  if (!std::getline(in, line) || line != "step,sample_id,t,e_a,e_l2")
    throw IoError(path + ": unexpected errors.csv header");

  std::vector<ErrorCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string step, sample, tok;
    if (!std::getline(ls, step, ',') || !std::getline(ls, sample, ','))
      throw IoError(path + ": malformed row '" + line + "'");
    double vals[3];
    for (double& v : vals) {
      if (!std::getline(ls, tok, ',')) throw IoError(path + ": malformed row '" + line + "'");
      try {
        v = std::stod(tok);
      } catch (const std::exception&) {
        throw IoError(path + ": non-numeric value '" + tok + "'");
      }
    }
    if (curves.empty() || curves.back().step != step || curves.back().sample_id != sample) {
      ErrorCurve c;
      c.step = step;
      c.sample_id = sample;
      curves.push_back(std::move(c));
    }
    curves.back().times.push_back(vals[0]);
    curves.back().e_a.push_back(vals[1]);
    curves.back().e_l2.push_back(vals[2]);
  }
  if (curves.empty()) throw IoError(path + ": no data rows");
  return curves;
}

void write_stats_csv(const std::string& path, const std::vector<StatCurve>& stats) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# msrom-stats v1\n";
  out << "t,step,mean_ea,var_ea,mean_el2,var_el2\n";
  for (const auto& s : stats)
    for (std::size_t n = 0; n < s.times.size(); ++n)
      out << fmt(s.times[n]) << ',' << s.step << ',' << fmt(s.mean_ea[n]) << ','
          << fmt(s.var_ea[n]) << ',' << fmt(s.mean_el2[n]) << ',' << fmt(s.var_el2[n])
          << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void write_run_json(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& config_echo,
                    const PipelineResult& result, const std::string& command) {
  nlohmann::json j;
  j["schema_version"] = "msrom-run v1";
  j["command"] = command;
  j["units"] = "dimensionless model units: lengths in mesh.lx/ly, time in [0, time.T]";
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : config_echo) cfg[k] = v;
  j["config"] = cfg;
  j["timings_sec"] = result.timings_sec;
  j["multiscale_dim"] = result.ms_dim;
  if (result.ms_lambda)
    j["lambda_min_discarded"] = *result.ms_lambda;
  j["pod_l"] = result.pod_l;
  j["pod_poincare_q"] = result.pod_Q;
  // Head and tail of the POD spectrum; enough for decay diagnostics without
  // dumping thousands of entries.
  const int ne = static_cast<int>(result.pod_eigenvalues.size());
  const int head = std::min(ne, 30);
  j["pod_eigenvalues_head"] =
      std::vector<double>(result.pod_eigenvalues.begin(), result.pod_eigenvalues.begin() + head);
  double tail = 0.0;
  for (int p = result.pod_l; p < ne; ++p) tail += result.pod_eigenvalues[p];
  j["pod_eigenvalue_tail_sum"] = tail;
  j["residual_trace"] = result.residual_trace;
  j["enrichment_levels"] = result.enrichment_levels;
  j["chosen_candidates"] = result.chosen_candidates;
  j["warnings"] = result.errors.warnings;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void export_pod_basis(const std::string& basis_path, const std::string& sidecar_path,
                      const PodSpace& pod, const TwoScaleMesh& mesh) {
  std::vector<RasterRecord> records;
  for (int k = 0; k < pod.l; ++k) {
    const Vec col = pod.basis.col(k);
    records.push_back(RasterRecord{mesh.nx() - 1, mesh.ny() - 1,
                                   std::vector<double>(col.data(), col.data() + col.size())});
  }
  write_raster_records(basis_path, records);

  nlohmann::json j;
  j["schema_version"] = "msrom-pod v1";
  j["l"] = pod.l;
  j["poincare_q"] = pod.poincare_q;
  j["eigenvalues"] = std::vector<double>(pod.eigenvalues.data(),
                                         pod.eigenvalues.data() + pod.eigenvalues.size());
  std::ofstream out(sidecar_path);
  if (!out) throw IoError("cannot write " + sidecar_path);
  out << j.dump(2) << '\n';
}

}  // namespace msrom
