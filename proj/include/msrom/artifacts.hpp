#pragma once

#include <string>
#include <utility>
#include <vector>

#include "msrom/pipeline.hpp"
#include "msrom/pod.hpp"

namespace msrom {

/// errors.csv: "# msrom-errors v1" then header step,sample_id,t,e_a,e_l2.
/// Rows are ordered (curve order, then time), values printed with %.17g, so
/// identical runs produce byte-identical files.
void write_errors_csv(const std::string& path, const ErrorReport& report);
std::vector<ErrorCurve> read_errors_csv(const std::string& path);

/// stats.csv: "# msrom-stats v1" then t,step,mean_ea,var_ea,mean_el2,var_el2.
void write_stats_csv(const std::string& path, const std::vector<StatCurve>& stats);

/// run.json: schema version, resolved config echo, timings, dimensions,
/// eigenvalue tails, warnings.
void write_run_json(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& config_echo,
                    const PipelineResult& result, const std::string& command);

/// POD basis export: one raster record per basis column over the interior
/// node grid, plus a JSON sidecar with eigenvalues, l, Q.
void export_pod_basis(const std::string& basis_path, const std::string& sidecar_path,
                      const PodSpace& pod, const TwoScaleMesh& mesh);

}  // namespace msrom
