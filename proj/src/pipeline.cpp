#include "msrom/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "msrom/util.hpp"

namespace msrom {

int BasisCounts::total_added() const {
  int sum = 0;
  for (int b : groups) sum += b;
  return sum;
}

std::string BasisCounts::label() const {
  std::string s = std::to_string(stage1);
  if (groups.empty()) return s + "+0";
  for (int b : groups) s += "+" + std::to_string(b);
  return s;
}

BasisCounts parse_basis_counts(const std::string& text) {
  BasisCounts counts;
  counts.groups.clear();
  std::size_t pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    const std::size_t next = text.find('+', pos);
    const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("basis counts: cannot parse '" + text + "'");
    const int v = std::stoi(tok);
    if (first) {
      counts.stage1 = v;
      first = false;
    } else {
      counts.groups.push_back(v);
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (counts.stage1 < 1)
    throw ConfigError("basis counts: stage-1 count must be >= 1 in '" + text + "'");
  if (counts.groups.empty()) counts.groups.push_back(0);
  return counts;
}

void RunConfig::validate() const {
  if (time.dt <= 0.0 || time.steps < 1)
    throw ConfigError("time: dt must be > 0 and steps >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("basis.theta must be in [0,1]");
  if (!(tau > 0.0)) throw ConfigError("basis.tau must be > 0");
  if (pod_l < 1) throw ConfigError("pod.l must be >= 1");
  if (n_train < 1 || n_eval < 1)
    throw ConfigError("samples: training and evaluation counts must be >= 1");
  if (train_seed == eval_seed && !allow_seed_overlap)
    throw ConfigError("samples: train_seed equals eval_seed; set "
                      "samples.allow_seed_overlap = true to override");
  for (int s : enrich_steps)
    if (s < 1 || s > time.steps)
      throw ConfigError("basis.enrich_steps entry " + std::to_string(s) +
                        " outside [1, " + std::to_string(time.steps) + "]");
  if (workers < 0) throw ConfigError("run.workers must be >= 0");
}

int RunConfig::effective_workers() const {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

EnrichmentConfig RunConfig::enrichment(int max_levels) const {
  EnrichmentConfig e;
  e.theta = theta;
  e.tau = tau;
  e.max_levels = max_levels;
  e.strategy = strategy;
  e.enrich_steps = enrich_steps;
  e.nonoverlap_filter = nonoverlap_filter;
  return e;
}

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double lap() {
    const auto t1 = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
    return s;
  }
};

}  // namespace

ProblemSetup::ProblemSetup(const RunConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  mesh_ = std::make_unique<TwoScaleMesh>(cfg.domain, cfg.nx, cfg.ny, cfg.coarse_nx,
                                         cfg.coarse_ny);
  const FieldSourceKind mean_kind = cfg.field.source == FieldSourceKind::kKle
                                        ? cfg.field.mean_source
                                        : cfg.field.source;
  mean_ = std::make_unique<PermeabilityField>(resolve_field(mean_kind));

  if (cfg.field.source == FieldSourceKind::kKle) {
    Vec mean_log(mesh_->num_cells());
    for (int c = 0; c < mesh_->num_cells(); ++c) mean_log[c] = std::log((*mean_)[c]);
    kle_ = build_kle(*mesh_, mean_log, cfg.field.cov, cfg.field.kle);
  }

  A_mean_ = assemble_stiffness(*mesh_, *mean_);
  M_ = assemble_mass(*mesh_);

  // Training set: materialized once so the farthest-point option can see the
  // whole candidate pool.
  if (!kle_) {
    for (int i = 0; i < cfg.n_train; ++i) training_.push_back(*mean_);
  } else if (cfg.selection == SampleSelection::kIid) {
    for (int i = 0; i < cfg.n_train; ++i)
      training_.push_back(sample_field(*kle_, make_draw(*kle_, cfg.train_seed, i)));
  } else {
    const int pool_size = 4 * cfg.n_train;
    std::vector<PermeabilityField> pool;
    pool.reserve(pool_size);
    for (int i = 0; i < pool_size; ++i)
      pool.push_back(sample_field(*kle_, make_draw(*kle_, cfg.train_seed, i)));
    auto linf = [&](const PermeabilityField& a, const PermeabilityField& b) {
      double d = 0.0;
      for (int c = 0; c < mesh_->num_cells(); ++c)
        d = std::max(d, std::abs(a[c] - b[c]));
      return d;
    };
    std::vector<char> used(pool_size, 0);
    training_.push_back(pool[0]);
    used[0] = 1;
    while (static_cast<int>(training_.size()) < cfg.n_train) {
      int best = -1;
      double best_dist = -1.0;
      for (int i = 0; i < pool_size; ++i) {
        if (used[i]) continue;
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& t : training_) dmin = std::min(dmin, linf(pool[i], t));
        if (dmin > best_dist) {
          best_dist = dmin;
          best = i;
        }
      }
      used[best] = 1;
      training_.push_back(pool[best]);
    }
  }
}

PermeabilityField ProblemSetup::resolve_field(FieldSourceKind kind) const {
  switch (kind) {
    case FieldSourceKind::kConstant:
      if (!(cfg_.field.constant > 0.0))
        throw ConfigError("field.constant must be > 0");
      return PermeabilityField::constant(mesh_->nx(), mesh_->ny(), cfg_.field.constant);
    case FieldSourceKind::kRaster:
      return ingest_raster(cfg_.field.raster_path, *mesh_);
    case FieldSourceKind::kSynthetic:
      return synth_high_contrast(*mesh_, cfg_.field.contrast, cfg_.field.pattern_seed);
    case FieldSourceKind::kKle:
      break;
  }
  throw ConfigError("field: KLE cannot be its own mean source");
}

PermeabilityField ProblemSetup::eval_field(int index) const {
  if (!kle_) return *mean_;
  return sample_field(*kle_, make_draw(*kle_, cfg_.eval_seed, index));
}

std::pair<std::vector<double>, std::vector<double>> compute_errors(
    const Trajectory& approx, const Trajectory& reference, const SpMat& A_sample,
    const SpMat& M, std::vector<std::string>* warnings) {
  if (approx.num_states() != reference.num_states())
    throw ConfigError("compute_errors: trajectories have different lengths");
  const int nt = reference.num_states();
  std::vector<double> ea(nt), el2(nt);
  bool warned = false;
  for (int n = 0; n < nt; ++n) {
    const Vec diff = approx.states.col(n) - reference.states.col(n);
    const double ref_a = energy_norm(A_sample, reference.states.col(n));
    const double ref_l2 = l2_norm(M, reference.states.col(n));
    const double diff_a = energy_norm(A_sample, diff);
    const double diff_l2 = l2_norm(M, diff);
    auto rel = [&](double d, double r) {
      if (r > 0.0) return d / r;
      if (d == 0.0) return 0.0;  // exact agreement of identically zero states
      return std::numeric_limits<double>::quiet_NaN();
    };
    ea[n] = rel(diff_a, ref_a);
    el2[n] = rel(diff_l2, ref_l2);
    if ((std::isnan(ea[n]) || std::isnan(el2[n])) && warnings && !warned) {
      warnings->push_back("zero reference norm at t = " +
                          std::to_string(reference.grid.time(n)) +
                          "; relative error undefined (NaN)");
      warned = true;
    }
  }
  return {std::move(ea), std::move(el2)};
}

std::vector<StatCurve> ensemble_stats(const std::vector<ErrorCurve>& curves) {
  std::vector<StatCurve> stats;
  std::vector<std::string> order;
  for (const auto& c : curves)
    if (std::find(order.begin(), order.end(), c.step) == order.end())
      order.push_back(c.step);

  for (const auto& step : order) {
    StatCurve s;
    s.step = step;
    std::vector<const ErrorCurve*> group;
    for (const auto& c : curves)
      if (c.step == step) group.push_back(&c);
    s.samples = static_cast<int>(group.size());
    s.times = group.front()->times;
    const int nt = static_cast<int>(s.times.size());
    for (const auto* c : group)
      if (static_cast<int>(c->times.size()) != nt)
        throw ConfigError("ensemble_stats: curves in step '" + step +
                          "' have mismatched time grids");
    s.mean_ea.resize(nt);
    s.var_ea.resize(nt);
    s.mean_el2.resize(nt);
    s.var_el2.resize(nt);
    auto accumulate = [&](auto pick, std::vector<double>& mean, std::vector<double>& var) {
      for (int n = 0; n < nt; ++n) {
        double sum = 0.0;
        for (const auto* c : group) sum += pick(*c, n);
        const double mu = sum / s.samples;
        double ss = 0.0;
        for (const auto* c : group) {
          const double d = pick(*c, n) - mu;
          ss += d * d;
        }
        mean[n] = mu;
        var[n] = s.samples > 1 ? ss / (s.samples - 1) : 0.0;
      }
    };
    accumulate([](const ErrorCurve& c, int n) { return c.e_a[n]; }, s.mean_ea, s.var_ea);
    accumulate([](const ErrorCurve& c, int n) { return c.e_l2[n]; }, s.mean_el2, s.var_el2);
    stats.push_back(std::move(s));
  }
  return stats;
}

namespace {

std::vector<double> to_times(const TimeGrid& grid) {
  std::vector<double> t(grid.steps + 1);
  for (int n = 0; n <= grid.steps; ++n) t[n] = grid.time(n);
  return t;
}

ErrorCurve make_curve(const std::string& step, const std::string& sample_id,
                      const TimeGrid& grid, const Trajectory& approx,
                      const Trajectory& reference, const SpMat& A, const SpMat& M,
                      std::vector<std::string>* warnings) {
  ErrorCurve curve;
  curve.step = step;
  curve.sample_id = sample_id;
  curve.times = to_times(grid);
  auto [ea, el2] = compute_errors(approx, reference, A, M, warnings);
  curve.e_a = std::move(ea);
  curve.e_l2 = std::move(el2);
  return curve;
}

struct SampleOutcome {
  ErrorCurve curve;
  Trajectory coarse;  // kept only for training samples (snapshot bank)
  double poincare_q = 0.0;
  std::vector<std::string> warnings;
};

// Shared by methods 1 and 2 once the final multiscale space is fixed:
// training solves + bank + POD + evaluation solves.
void run_steps_2_and_3(const ProblemSetup& setup, const ReducedSpace& space,
                       PipelineResult& result) {
  const RunConfig& cfg = setup.config();
  const auto& mesh = setup.mesh();
  const SpMat& M = setup.mass();
  const SourceTerm f = cfg.source_term();
  const InitialData g0 = cfg.initial_data();
  const int workers = cfg.effective_workers();
  Timer timer;

  // Step 2: coarse solves for the training samples fill the snapshot bank.
  const auto& training = setup.training_fields();
  std::vector<SampleOutcome> train_out(training.size());
  parallel_for(static_cast<int>(training.size()), workers, [&](int i) {
    const SpMat A_i = assemble_stiffness(mesh, training[i]);
    const Trajectory fine = solve_fine_trajectory(mesh, A_i, M, f, g0, cfg.time, cfg.solver);
    Trajectory coarse = solve_coarse_trajectory(mesh, space, A_i, M, f, g0, cfg.time);
    train_out[i].curve = make_curve("step2", "train" + std::to_string(i), cfg.time,
                                    coarse, fine, A_i, M, &train_out[i].warnings);
    train_out[i].poincare_q = estimate_poincare_Q(A_i, M);
    train_out[i].coarse = std::move(coarse);
  });
  double Q = 0.0;
  std::vector<Trajectory> bank_trajs;
  std::vector<int> bank_ids;
  for (std::size_t i = 0; i < train_out.size(); ++i) {
    Q = std::max(Q, train_out[i].poincare_q);
    bank_trajs.push_back(std::move(train_out[i].coarse));
    bank_ids.push_back(static_cast<int>(i));
    result.errors.curves.push_back(std::move(train_out[i].curve));
    for (auto& w : train_out[i].warnings) result.errors.warnings.push_back(std::move(w));
  }
  result.timings_sec["step2_training"] = timer.lap();

  const SnapshotBank bank = build_snapshot_bank(bank_trajs, bank_ids, Q);
  const auto pod_ptr = std::make_shared<const PodSpace>(
      compute_pod(bank, setup.stiffness_mean(), cfg.pod_l));
  const PodSpace& pod = *pod_ptr;
  result.pod = pod_ptr;
  result.pod_l = pod.l;
  result.pod_Q = Q;
  result.pod_eigenvalues.assign(pod.eigenvalues.data(),
                                pod.eigenvalues.data() + pod.eigenvalues.size());
  result.timings_sec["pod_build"] = timer.lap();

  // Step 3: reduced online solves for every evaluation sample.
  std::vector<SampleOutcome> eval_out(cfg.n_eval);
  parallel_for(cfg.n_eval, workers, [&](int i) {
    const PermeabilityField field = setup.eval_field(i);
    const SpMat A_i = assemble_stiffness(mesh, field);
    const Trajectory fine = solve_fine_trajectory(mesh, A_i, M, f, g0, cfg.time, cfg.solver);
    const Trajectory reduced = solve_pod_trajectory(mesh, pod, A_i, M, f, g0, cfg.time);
    eval_out[i].curve = make_curve("step3", "eval" + std::to_string(i), cfg.time,
                                   reduced, fine, A_i, M, &eval_out[i].warnings);
  });
  for (auto& out : eval_out) {
    result.errors.curves.push_back(std::move(out.curve));
    for (auto& w : out.warnings) result.errors.warnings.push_back(std::move(w));
  }
  result.timings_sec["step3_evaluation"] = timer.lap();
}

std::vector<int> uniform_counts(const TwoScaleMesh& mesh, int l) {
  return std::vector<int>(mesh.num_interior_coarse_nodes(), l);
}

}  // namespace

PipelineResult run_method1(const RunConfig& cfg) {
  ProblemSetup setup(cfg);
  const auto& mesh = setup.mesh();
  const SpMat& A = setup.stiffness_mean();
  const SpMat& M = setup.mass();
  const SourceTerm f = cfg.source_term();
  const InitialData g0 = cfg.initial_data();
  const int workers = cfg.effective_workers();

  PipelineResult result;
  Timer timer;

  // Offline stages 1 and 2, both on the mean field.
  ReducedSpace stage1 =
      assemble_multiscale_space(mesh, setup.mean_field(), A, uniform_counts(mesh, cfg.counts.stage1), workers);
  result.ms_lambda = stage1.lambda;
  result.timings_sec["offline_stage1"] = timer.lap();

  EnrichmentResult enriched =
      enrich_trajectory(mesh, A, M, f, g0, cfg.time, stage1,
                        cfg.enrichment(cfg.counts.total_added()), workers);
  result.ms_dim = enriched.space.dim();
  result.enrichment_levels = enriched.levels_used;
  for (const auto& rep : enriched.reports)
    if (rep.time_step == cfg.enrich_steps.front()) result.residual_trace.push_back(rep.global_norm);
  for (auto& w : enriched.warnings) result.errors.warnings.push_back(std::move(w));
  result.timings_sec["offline_stage2"] = timer.lap();

  const Trajectory fine_mean =
      solve_fine_trajectory(mesh, A, M, f, g0, cfg.time, cfg.solver);
  result.errors.curves.push_back(make_curve("step1", "mean", cfg.time,
                                            enriched.trajectory, fine_mean, A, M,
                                            &result.errors.warnings));
  result.timings_sec["step1_reference"] = timer.lap();

  run_steps_2_and_3(setup, enriched.space, result);
  result.stats = ensemble_stats(result.errors.curves);
  return result;
}

PipelineResult run_method2(const RunConfig& cfg) {
  ProblemSetup setup(cfg);
  const auto& mesh = setup.mesh();
  const SpMat& A = setup.stiffness_mean();
  const SpMat& M = setup.mass();
  const SourceTerm f = cfg.source_term();
  const InitialData g0 = cfg.initial_data();
  const int workers = cfg.effective_workers();

  PipelineResult result;
  Timer timer;

  ReducedSpace space =
      assemble_multiscale_space(mesh, setup.mean_field(), A, uniform_counts(mesh, cfg.counts.stage1), workers);
  result.ms_lambda = space.lambda;
  result.timings_sec["offline_stage1"] = timer.lap();

  // Step-1 error of the stage-1 space on the mean field (the hierarchical
  // enrichment below is driven by samples, not the mean field).
  const Trajectory fine_mean =
      solve_fine_trajectory(mesh, A, M, f, g0, cfg.time, cfg.solver);
  const Trajectory coarse_mean = solve_coarse_trajectory(mesh, space, A, M, f, g0, cfg.time);
  result.errors.curves.push_back(make_curve("step1", "mean", cfg.time, coarse_mean,
                                            fine_mean, A, M, &result.errors.warnings));
  result.timings_sec["step1_reference"] = timer.lap();

  // Hierarchical offline stage 2: per round, enrich with the candidate field
  // of largest global residual.
  const auto& candidates = setup.training_fields();
  std::vector<SpMat> A_cand(candidates.size());
  parallel_for(static_cast<int>(candidates.size()), workers,
               [&](int i) { A_cand[i] = assemble_stiffness(mesh, candidates[i]); });
  const int probe_step = cfg.enrich_steps.front();

  for (int round = 0; round < static_cast<int>(cfg.counts.groups.size()); ++round) {
    const int budget = cfg.counts.groups[round];
    if (budget == 0) continue;
    std::vector<double> norms(candidates.size());
    parallel_for(static_cast<int>(candidates.size()), workers, [&](int i) {
      norms[i] = residual_report_at_step(mesh, A_cand[i], M, f, g0, cfg.time, space,
                                         probe_step)
                     .global_norm;
    });
    int chosen = 0;
    for (std::size_t i = 1; i < norms.size(); ++i)
      if (norms[i] > norms[chosen]) chosen = static_cast<int>(i);
    result.chosen_candidates.push_back(chosen);
    result.residual_trace.push_back(norms[chosen]);
    if (norms[chosen] <= cfg.tau) break;

    EnrichmentResult er = enrich_trajectory(mesh, A_cand[chosen], M, f, g0, cfg.time,
                                             space, cfg.enrichment(budget), workers);
    space = std::move(er.space);
    for (int lv : er.levels_used) result.enrichment_levels.push_back(lv);
    for (auto& w : er.warnings) result.errors.warnings.push_back(std::move(w));
  }
  result.ms_dim = space.dim();
  result.timings_sec["offline_stage2"] = timer.lap();

  run_steps_2_and_3(setup, space, result);
  result.stats = ensemble_stats(result.errors.curves);
  return result;
}

PipelineResult run_fine(const RunConfig& cfg) {
  ProblemSetup setup(cfg);
  PipelineResult result;
  Timer timer;
  const Trajectory fine = solve_fine_trajectory(setup.mesh(), setup.stiffness_mean(),
                                                setup.mass(), cfg.source_term(),
                                                cfg.initial_data(), cfg.time, cfg.solver);
  result.errors.curves.push_back(make_curve("fine", "mean", cfg.time, fine, fine,
                                            setup.stiffness_mean(), setup.mass(),
                                            &result.errors.warnings));
  result.timings_sec["fine_solve"] = timer.lap();
  result.stats = ensemble_stats(result.errors.curves);
  return result;
}

PipelineResult run_gmsfem(const RunConfig& cfg) {
  ProblemSetup setup(cfg);
  const auto& mesh = setup.mesh();
  const SpMat& A = setup.stiffness_mean();
  const SpMat& M = setup.mass();
  const SourceTerm f = cfg.source_term();
  const InitialData g0 = cfg.initial_data();
  const int workers = cfg.effective_workers();

  PipelineResult result;
  Timer timer;
  ReducedSpace stage1 =
      assemble_multiscale_space(mesh, setup.mean_field(), A, uniform_counts(mesh, cfg.counts.stage1), workers);
  result.ms_lambda = stage1.lambda;
  result.timings_sec["offline_stage1"] = timer.lap();

  EnrichmentResult enriched =
      enrich_trajectory(mesh, A, M, f, g0, cfg.time, stage1,
                        cfg.enrichment(cfg.counts.total_added()), workers);
  result.ms_dim = enriched.space.dim();
  result.enrichment_levels = enriched.levels_used;
  for (const auto& rep : enriched.reports)
    if (rep.time_step == cfg.enrich_steps.front()) result.residual_trace.push_back(rep.global_norm);
  for (auto& w : enriched.warnings) result.errors.warnings.push_back(std::move(w));
  result.timings_sec["offline_stage2"] = timer.lap();

  const Trajectory fine_mean =
      solve_fine_trajectory(mesh, A, M, f, g0, cfg.time, cfg.solver);
  result.errors.curves.push_back(make_curve("step1", "mean", cfg.time,
                                            enriched.trajectory, fine_mean, A, M,
                                            &result.errors.warnings));
  result.timings_sec["step1_reference"] = timer.lap();
  result.stats = ensemble_stats(result.errors.curves);
  return result;
}

}  // namespace msrom
