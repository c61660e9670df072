#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msrom/artifacts.hpp"
#include "msrom/config.hpp"
#include "msrom/errors.hpp"
#include "msrom/kle.hpp"
#include "msrom/pipeline.hpp"
#include "msrom/util.hpp"

namespace {

namespace fs = std::filesystem;
using namespace msrom;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  int workers = -1;          // -1 = not given
  int pod_l = -1;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* opt = cmd->add_option("--config,-c", args.config_path, "config file (INI sections)");
  if (config_required) opt->required();
  cmd->add_option("--set", args.overrides, "override: section.key=value (repeatable)");
  cmd->add_option("--out,-o", args.out_dir, "output directory");
  cmd->add_option("--workers", args.workers, "worker thread cap (0 = logical cores)");
  cmd->add_option("--l", args.pod_l, "POD basis count override");
  cmd->add_option("--seed", args.seed,
                  "master seed: sets samples.train_seed and a disjoint eval_seed");
}

RunConfig load_config(const CommonArgs& args) {
  RawConfig raw;
  if (!args.config_path.empty()) raw = parse_config_file(args.config_path);
  apply_overrides(raw, args.overrides);
  if (args.workers >= 0) raw["run.workers"] = std::to_string(args.workers);
  if (args.pod_l >= 0) raw["pod.l"] = std::to_string(args.pod_l);
  if (args.seed >= 0) {
    raw["samples.train_seed"] = std::to_string(static_cast<std::uint64_t>(args.seed));
    raw["samples.eval_seed"] =
        std::to_string(derive_seed(static_cast<std::uint64_t>(args.seed), 0xe7a1ULL));
  }
  return resolve_run_config(raw);
}

void emit_run_artifacts(const CommonArgs& args, const RunConfig& cfg,
                        const PipelineResult& result, const std::string& command) {
  fs::create_directories(args.out_dir);
  write_errors_csv(args.out_dir + "/errors.csv", result.errors);
  write_stats_csv(args.out_dir + "/stats.csv", result.stats);
  write_run_json(args.out_dir + "/run.json", echo_config(cfg), result, command);
  if (result.pod) {
    const TwoScaleMesh mesh(cfg.domain, cfg.nx, cfg.ny, cfg.coarse_nx, cfg.coarse_ny);
    export_pod_basis(args.out_dir + "/pod_basis.field", args.out_dir + "/pod_basis.json",
                     *result.pod, mesh);
  }
  for (const auto& w : result.errors.warnings) std::cerr << "warning: " << w << '\n';
}

int run_pipeline_command(const CommonArgs& args, const std::string& which) {
  const RunConfig cfg = load_config(args);
  PipelineResult result;
  if (which == "fine")
    result = run_fine(cfg);
  else if (which == "gmsfem")
    result = run_gmsfem(cfg);
  else if (which == "method1")
    result = run_method1(cfg);
  else
    result = run_method2(cfg);
  emit_run_artifacts(args, cfg, result, "run " + which);
  std::cout << "run " << which << ": " << result.errors.curves.size()
            << " error curves -> " << args.out_dir << '\n';
  return 0;
}

int cmd_field_synth(const CommonArgs& args, const std::string& out_file) {
  const RunConfig cfg = load_config(args);
  const TwoScaleMesh mesh(cfg.domain, cfg.nx, cfg.ny, cfg.coarse_nx, cfg.coarse_ny);
  const auto field = synth_high_contrast(mesh, cfg.field.contrast, cfg.field.pattern_seed);
  write_field(out_file, field);
  std::cout << "field synth: " << mesh.nx() << "x" << mesh.ny() << " contrast "
            << cfg.field.contrast << " -> " << out_file << '\n';
  return 0;
}

int cmd_field_ingest(const CommonArgs& args, const std::string& in_file,
                     const std::string& out_file) {
  const RunConfig cfg = load_config(args);
  const TwoScaleMesh mesh(cfg.domain, cfg.nx, cfg.ny, cfg.coarse_nx, cfg.coarse_ny);
  const auto field = ingest_raster(in_file, mesh);
  write_field(out_file, field);
  std::cout << "field ingest: " << in_file << " -> " << out_file << " (min "
            << field.min() << ", max " << field.max() << ")\n";
  return 0;
}

int cmd_kle_build(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  ProblemSetup setup(cfg);
  if (!setup.kle()) throw ConfigError("kle build: field.source must be kle");
  fs::create_directories(args.out_dir);
  save_kle(*setup.kle(), args.out_dir);
  std::cout << "kle build: " << setup.kle()->num_modes() << " modes -> "
            << args.out_dir << '\n';
  return 0;
}

int cmd_kle_sample(const CommonArgs& args, int count) {
  const RunConfig cfg = load_config(args);
  ProblemSetup setup(cfg);
  if (!setup.kle()) throw ConfigError("kle sample: field.source must be kle");
  fs::create_directories(args.out_dir);
  for (int i = 0; i < count; ++i) {
    const auto field = sample_field(*setup.kle(), make_draw(*setup.kle(), cfg.train_seed, i));
    write_field(args.out_dir + "/sample_" + std::to_string(i) + ".field", field);
  }
  std::cout << "kle sample: " << count << " fields -> " << args.out_dir << '\n';
  return 0;
}

int cmd_report(const std::string& errors_path, const std::string& out_file) {
  const auto curves = read_errors_csv(errors_path);
  const auto stats = ensemble_stats(curves);
  write_stats_csv(out_file, stats);
  std::cout << "report: " << curves.size() << " curves -> " << out_file << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GMsFEM-POD multiscale reduced-order solver for heterogeneous "
               "transient flow"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* field = app.add_subcommand("field", "permeability field tooling");
  field->require_subcommand(1);
  std::string field_out = "field.out";
  std::string field_in;
  auto* synth = field->add_subcommand("synth", "synthesize a high-contrast field");
  add_common(synth, args);
  synth->add_option("--file", field_out, "output field path")->required();
  auto* ingest = field->add_subcommand("ingest", "validate and canonicalize a raster");
  add_common(ingest, args);
  ingest->add_option("--in", field_in, "input raster (binary or CSV)")->required();
  ingest->add_option("--file", field_out, "output field path")->required();

  auto* kle = app.add_subcommand("kle", "Karhunen-Loeve model tooling");
  kle->require_subcommand(1);
  auto* kle_build_cmd = kle->add_subcommand("build", "build and persist the KLE model");
  add_common(kle_build_cmd, args);
  int sample_count = 10;
  auto* kle_sample_cmd = kle->add_subcommand("sample", "draw permeability samples");
  add_common(kle_sample_cmd, args);
  kle_sample_cmd->add_option("--count", sample_count, "number of samples");

  auto* run = app.add_subcommand("run", "pipeline runs");
  run->require_subcommand(1);
  auto* run_fine_cmd = run->add_subcommand("fine", "fine reference solve");
  auto* run_gmsfem_cmd = run->add_subcommand("gmsfem", "offline stages on the mean field");
  auto* run_m1_cmd = run->add_subcommand("method1", "three-step pipeline, mean-field enrichment");
  auto* run_m2_cmd = run->add_subcommand("method2", "three-step pipeline, hierarchical enrichment");
  for (auto* cmd : {run_fine_cmd, run_gmsfem_cmd, run_m1_cmd, run_m2_cmd})
    add_common(cmd, args);

  auto* report = app.add_subcommand("report", "stats.csv from an errors.csv");
  std::string report_errors, report_out = "stats.csv";
  report->add_option("--errors", report_errors, "errors.csv path")->required();
  report->add_option("--out,-o", report_out, "output stats.csv path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_field_synth(args, field_out);
    if (ingest->parsed()) return cmd_field_ingest(args, field_in, field_out);
    if (kle_build_cmd->parsed()) return cmd_kle_build(args);
    if (kle_sample_cmd->parsed()) return cmd_kle_sample(args, sample_count);
    if (run_fine_cmd->parsed()) return run_pipeline_command(args, "fine");
    if (run_gmsfem_cmd->parsed()) return run_pipeline_command(args, "gmsfem");
    if (run_m1_cmd->parsed()) return run_pipeline_command(args, "method1");
    if (run_m2_cmd->parsed()) return run_pipeline_command(args, "method2");
    if (report->parsed()) return cmd_report(report_errors, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << "no subcommand executed\n";
  return 2;
}
