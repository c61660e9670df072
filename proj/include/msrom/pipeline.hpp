#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msrom/enrichment.hpp"
#include "msrom/kle.hpp"
#include "msrom/pod.hpp"

namespace msrom {

/// "A+B" basis accounting: A spectral basis functions per neighborhood from
/// offline stage 1, then one residual-driven group per extra "+B_k" term,
/// applied hierarchically ("2+1+1+1" splits 3 added basis into 3 rounds).
struct BasisCounts {
  int stage1 = 2;
  std::vector<int> groups = {3};

  int total_added() const;
  std::string label() const;
};

BasisCounts parse_basis_counts(const std::string& text);

enum class FieldSourceKind { kConstant, kRaster, kSynthetic, kKle };
enum class SampleSelection { kIid, kFarthest };

struct FieldConfig {
  FieldSourceKind source = FieldSourceKind::kConstant;
  /// Mean log-permeability source when source == kKle.
  FieldSourceKind mean_source = FieldSourceKind::kConstant;
  double constant = 1.0;
  std::string raster_path;
  double contrast = 1e4;
  std::uint64_t pattern_seed = 7;
  CovarianceSpec cov;
  KleBuildOptions kle;
};

struct RunConfig {
  Domain domain;
  int nx = 40, ny = 40, coarse_nx = 8, coarse_ny = 8;
  FieldConfig field;
  TimeGrid time{0.01, 100};
  BasisCounts counts;
  double theta = 1.0;
  double tau = 1e-12;
  EnrichmentConfig::Strategy strategy = EnrichmentConfig::Strategy::kReset;
  std::vector<int> enrich_steps = {1};
  bool nonoverlap_filter = false;
  int pod_l = 20;
  int n_train = 10;
  std::uint64_t train_seed = 12345;
  int n_eval = 100;
  std::uint64_t eval_seed = 67890;
  SampleSelection selection = SampleSelection::kIid;
  bool allow_seed_overlap = false;
  double f_value = 1.0;
  double g_value = 0.0;
  int workers = 0;  // 0 = logical cores
  SymmetricSolver::Options solver;

  void validate() const;
  int effective_workers() const;
  EnrichmentConfig enrichment(int max_levels) const;
  SourceTerm source_term() const { return SourceTerm::constant(f_value); }
  InitialData initial_data() const { return InitialData::constant(g_value); }
};

struct ErrorCurve {
  std::string step;       // "step1" | "step2" | "step3" | "fine"
  std::string sample_id;  // "mean" | "train<i>" | "eval<i>"
  std::vector<double> times;
  std::vector<double> e_a;
  std::vector<double> e_l2;
};

struct ErrorReport {
  std::vector<ErrorCurve> curves;
  std::vector<std::string> warnings;
};

/// Relative energy and L2 error curves of approx against reference under the
/// sample's stiffness. A zero-norm reference state yields NaN unless the
/// approximation is identically zero there too (exact agreement), in which
/// case the error is 0.
std::pair<std::vector<double>, std::vector<double>> compute_errors(
    const Trajectory& approx, const Trajectory& reference, const SpMat& A_sample,
    const SpMat& M, std::vector<std::string>* warnings = nullptr);

struct StatCurve {
  std::string step;
  std::vector<double> times;
  std::vector<double> mean_ea, var_ea, mean_el2, var_el2;
  int samples = 0;
};

/// Pointwise-in-time sample mean and unbiased variance per step label.
std::vector<StatCurve> ensemble_stats(const std::vector<ErrorCurve>& curves);

struct PipelineResult {
  ErrorReport errors;
  std::vector<StatCurve> stats;
  std::shared_ptr<const PodSpace> pod;  // set by the method pipelines
  int ms_dim = 0;
  std::optional<double> ms_lambda;
  int pod_l = 0;
  double pod_Q = 0.0;
  std::vector<double> pod_eigenvalues;   // descending
  std::vector<double> residual_trace;    // ||R|| per level at the first enrichment step
  std::vector<int> enrichment_levels;    // levels used per enrichment step / round
  std::vector<int> chosen_candidates;    // method 2: sample index per round
  std::map<std::string, double> timings_sec;
};

/// Mesh, operators, mean field, optional KLE model, and the sample streams
/// shared by all pipeline stages. Immutable after construction.
class ProblemSetup {
 public:
  explicit ProblemSetup(const RunConfig& cfg);

  const RunConfig& config() const { return cfg_; }
  const TwoScaleMesh& mesh() const { return *mesh_; }
  const PermeabilityField& mean_field() const { return *mean_; }
  const SpMat& mass() const { return M_; }
  const SpMat& stiffness_mean() const { return A_mean_; }
  const KleModel* kle() const { return kle_ ? &*kle_ : nullptr; }

  /// Training fields, materialized (iid streams or farthest-point selection).
  const std::vector<PermeabilityField>& training_fields() const { return training_; }
  PermeabilityField eval_field(int index) const;

 private:
  PermeabilityField resolve_field(FieldSourceKind kind) const;

  RunConfig cfg_;
  std::unique_ptr<TwoScaleMesh> mesh_;
  std::unique_ptr<PermeabilityField> mean_;
  std::optional<KleModel> kle_;
  std::vector<PermeabilityField> training_;
  SpMat A_mean_, M_;
};

PipelineResult run_method1(const RunConfig& cfg);
PipelineResult run_method2(const RunConfig& cfg);
/// Fine reference solve on the mean field; errors against itself (all zero).
PipelineResult run_fine(const RunConfig& cfg);
/// Offline stages 1-2 on the mean field only (step-1 errors).
PipelineResult run_gmsfem(const RunConfig& cfg);

}  // namespace msrom
