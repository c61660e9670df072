#include "msrom/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "msrom/errors.hpp"

namespace msrom {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError("config: key '" + key + "' = '" + value + "' is not " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (pos != value.size()) bad_value(key, value, "a number");
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    bad_value(key, value, "an integer");
  }
  if (pos != value.size()) bad_value(key, value, "an integer");
  return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    bad_value(key, value, "a nonnegative integer");
  }
  if (pos != value.size()) bad_value(key, value, "a nonnegative integer");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::istringstream is(value);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(static_cast<int>(parse_int(key, tok)));
  }
  if (out.empty()) bad_value(key, value, "a comma-separated integer list");
  return out;
}

FieldSourceKind parse_source(const std::string& key, const std::string& value) {
  if (value == "constant") return FieldSourceKind::kConstant;
  if (value == "raster") return FieldSourceKind::kRaster;
  if (value == "synthetic") return FieldSourceKind::kSynthetic;
  if (value == "kle") return FieldSourceKind::kKle;
  bad_value(key, value, "one of constant|raster|synthetic|kle");
}

}  // namespace

RawConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  RawConfig raw;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(path + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    raw[full] = value;
  }
  return raw;
}

void apply_overrides(RawConfig& raw, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + ov + "' is not of the form section.key=value");
    raw[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
  }
}

RunConfig resolve_run_config(const RawConfig& raw) {
  RunConfig cfg;
  double cfg_final_time = 0.0;  // set when time.T is given; resolved after parsing
  bool have_final_time = false;
  using Handler = std::function<void(const std::string&, const std::string&)>;
  std::vector<std::pair<std::string, Handler>> schema = {
      {"mesh.nx", [&](const std::string& k, const std::string& v) { cfg.nx = static_cast<int>(parse_int(k, v)); }},
      {"mesh.ny", [&](const std::string& k, const std::string& v) { cfg.ny = static_cast<int>(parse_int(k, v)); }},
      {"mesh.NX", [&](const std::string& k, const std::string& v) { cfg.coarse_nx = static_cast<int>(parse_int(k, v)); }},
      {"mesh.NY", [&](const std::string& k, const std::string& v) { cfg.coarse_ny = static_cast<int>(parse_int(k, v)); }},
      {"mesh.lx", [&](const std::string& k, const std::string& v) { cfg.domain.lx = parse_double(k, v); }},
      {"mesh.ly", [&](const std::string& k, const std::string& v) { cfg.domain.ly = parse_double(k, v); }},
      {"field.source", [&](const std::string& k, const std::string& v) { cfg.field.source = parse_source(k, v); }},
      {"field.mean_source", [&](const std::string& k, const std::string& v) { cfg.field.mean_source = parse_source(k, v); }},
      {"field.constant", [&](const std::string& k, const std::string& v) { cfg.field.constant = parse_double(k, v); }},
      {"field.raster", [&](const std::string&, const std::string& v) { cfg.field.raster_path = v; }},
      {"field.contrast", [&](const std::string& k, const std::string& v) { cfg.field.contrast = parse_double(k, v); }},
      {"field.pattern_seed", [&](const std::string& k, const std::string& v) { cfg.field.pattern_seed = parse_seed(k, v); }},
      {"kle.sigma2", [&](const std::string& k, const std::string& v) { cfg.field.cov.sigma2 = parse_double(k, v); }},
      {"kle.eta1", [&](const std::string& k, const std::string& v) { cfg.field.cov.eta1 = parse_double(k, v); }},
      {"kle.eta2", [&](const std::string& k, const std::string& v) { cfg.field.cov.eta2 = parse_double(k, v); }},
      {"kle.modes", [&](const std::string& k, const std::string& v) { cfg.field.kle.truncation.fixed_modes = static_cast<int>(parse_int(k, v)); }},
      {"kle.energy_fraction", [&](const std::string& k, const std::string& v) { cfg.field.kle.truncation.energy_fraction = parse_double(k, v); }},
      {"kle.max_modes", [&](const std::string& k, const std::string& v) { cfg.field.kle.truncation.max_modes = static_cast<int>(parse_int(k, v)); }},
      {"kle.dense_limit", [&](const std::string& k, const std::string& v) { cfg.field.kle.dense_limit = static_cast<int>(parse_int(k, v)); }},
      {"kle.aux_nx", [&](const std::string& k, const std::string& v) { cfg.field.kle.aux_nx = static_cast<int>(parse_int(k, v)); }},
      {"kle.aux_ny", [&](const std::string& k, const std::string& v) { cfg.field.kle.aux_ny = static_cast<int>(parse_int(k, v)); }},
      {"time.dt", [&](const std::string& k, const std::string& v) { cfg.time.dt = parse_double(k, v); }},
      {"time.T", [&](const std::string& k, const std::string& v) {
         const double T = parse_double(k, v);
         if (!(T > 0.0)) bad_value(k, v, "a positive final time");
         cfg_final_time = T;
         have_final_time = true;
       }},
      {"basis.counts", [&](const std::string&, const std::string& v) { cfg.counts = parse_basis_counts(v); }},
      {"basis.theta", [&](const std::string& k, const std::string& v) { cfg.theta = parse_double(k, v); }},
      {"basis.tau", [&](const std::string& k, const std::string& v) { cfg.tau = parse_double(k, v); }},
      {"basis.strategy", [&](const std::string& k, const std::string& v) {
         if (v == "reset") cfg.strategy = EnrichmentConfig::Strategy::kReset;
         else if (v == "accumulate") cfg.strategy = EnrichmentConfig::Strategy::kAccumulate;
         else bad_value(k, v, "reset|accumulate");
       }},
      {"basis.enrich_steps", [&](const std::string& k, const std::string& v) { cfg.enrich_steps = parse_int_list(k, v); }},
      {"basis.nonoverlap", [&](const std::string& k, const std::string& v) { cfg.nonoverlap_filter = parse_bool(k, v); }},
      {"pod.l", [&](const std::string& k, const std::string& v) { cfg.pod_l = static_cast<int>(parse_int(k, v)); }},
      {"samples.n_train", [&](const std::string& k, const std::string& v) { cfg.n_train = static_cast<int>(parse_int(k, v)); }},
      {"samples.train_seed", [&](const std::string& k, const std::string& v) { cfg.train_seed = parse_seed(k, v); }},
      {"samples.n_eval", [&](const std::string& k, const std::string& v) { cfg.n_eval = static_cast<int>(parse_int(k, v)); }},
      {"samples.eval_seed", [&](const std::string& k, const std::string& v) { cfg.eval_seed = parse_seed(k, v); }},
      {"samples.selection", [&](const std::string& k, const std::string& v) {
         if (v == "iid") cfg.selection = SampleSelection::kIid;
         else if (v == "farthest") cfg.selection = SampleSelection::kFarthest;
         else bad_value(k, v, "iid|farthest");
       }},
      {"samples.allow_seed_overlap", [&](const std::string& k, const std::string& v) { cfg.allow_seed_overlap = parse_bool(k, v); }},
      {"source.f", [&](const std::string& k, const std::string& v) { cfg.f_value = parse_double(k, v); }},
      {"source.g", [&](const std::string& k, const std::string& v) { cfg.g_value = parse_double(k, v); }},
      {"run.workers", [&](const std::string& k, const std::string& v) { cfg.workers = static_cast<int>(parse_int(k, v)); }},
      {"run.direct_max_dim", [&](const std::string& k, const std::string& v) { cfg.solver.direct_max_dim = static_cast<int>(parse_int(k, v)); }},
      {"run.cg_tol", [&](const std::string& k, const std::string& v) { cfg.solver.cg_tol = parse_double(k, v); }},
  };

  for (const auto& [key, value] : raw) {
    const auto it = std::find_if(schema.begin(), schema.end(),
                                 [&](const auto& entry) { return entry.first == key; });
    if (it == schema.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(key, value);
  }

  if (have_final_time) {
    const double T = cfg_final_time;
    const int steps = static_cast<int>(std::llround(T / cfg.time.dt));
    if (steps < 1 || std::abs(steps * cfg.time.dt - T) > 1e-9 * std::max(T, 1.0))
      throw ConfigError("config: time.T = " + std::to_string(T) +
                        " is not an integer multiple of time.dt = " +
                        std::to_string(cfg.time.dt));
    cfg.time.steps = steps;
  }

  // Mesh invariants (divisibility) surface as config errors here.
  TwoScaleMesh probe(cfg.domain, cfg.nx, cfg.ny, cfg.coarse_nx, cfg.coarse_ny);
  (void)probe;
  cfg.field.cov.validate();
  cfg.validate();
  if (cfg.field.source == FieldSourceKind::kRaster ||
      (cfg.field.source == FieldSourceKind::kKle &&
       cfg.field.mean_source == FieldSourceKind::kRaster)) {
    if (cfg.field.raster_path.empty())
      throw ConfigError("config: field.raster path required for raster sources");
  }
  return cfg;
}

std::vector<std::pair<std::string, std::string>> echo_config(const RunConfig& cfg) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto src = [](FieldSourceKind k) {
    switch (k) {
      case FieldSourceKind::kConstant: return "constant";
      case FieldSourceKind::kRaster: return "raster";
      case FieldSourceKind::kSynthetic: return "synthetic";
      case FieldSourceKind::kKle: return "kle";
    }
    return "constant";
  };
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("mesh.nx", std::to_string(cfg.nx));
  out.emplace_back("mesh.ny", std::to_string(cfg.ny));
  out.emplace_back("mesh.NX", std::to_string(cfg.coarse_nx));
  out.emplace_back("mesh.NY", std::to_string(cfg.coarse_ny));
  out.emplace_back("mesh.lx", fmt(cfg.domain.lx));
  out.emplace_back("mesh.ly", fmt(cfg.domain.ly));
  out.emplace_back("field.source", src(cfg.field.source));
  out.emplace_back("field.mean_source", src(cfg.field.mean_source));
  out.emplace_back("field.constant", fmt(cfg.field.constant));
  out.emplace_back("field.raster", cfg.field.raster_path);
  out.emplace_back("field.contrast", fmt(cfg.field.contrast));
  out.emplace_back("field.pattern_seed", std::to_string(cfg.field.pattern_seed));
  out.emplace_back("kle.sigma2", fmt(cfg.field.cov.sigma2));
  out.emplace_back("kle.eta1", fmt(cfg.field.cov.eta1));
  out.emplace_back("kle.eta2", fmt(cfg.field.cov.eta2));
  out.emplace_back("kle.modes", std::to_string(cfg.field.kle.truncation.fixed_modes));
  out.emplace_back("kle.energy_fraction", fmt(cfg.field.kle.truncation.energy_fraction));
  out.emplace_back("kle.max_modes", std::to_string(cfg.field.kle.truncation.max_modes));
  out.emplace_back("kle.dense_limit", std::to_string(cfg.field.kle.dense_limit));
  out.emplace_back("kle.aux_nx", std::to_string(cfg.field.kle.aux_nx));
  out.emplace_back("kle.aux_ny", std::to_string(cfg.field.kle.aux_ny));
  out.emplace_back("time.dt", fmt(cfg.time.dt));
  out.emplace_back("time.T", fmt(cfg.time.final_time()));
  out.emplace_back("basis.counts", cfg.counts.label());
  out.emplace_back("basis.theta", fmt(cfg.theta));
  out.emplace_back("basis.tau", fmt(cfg.tau));
  out.emplace_back("basis.strategy",
                   cfg.strategy == EnrichmentConfig::Strategy::kReset ? "reset" : "accumulate");
  {
    std::string steps;
    for (std::size_t i = 0; i < cfg.enrich_steps.size(); ++i)
      steps += (i ? "," : "") + std::to_string(cfg.enrich_steps[i]);
    out.emplace_back("basis.enrich_steps", steps);
  }
  out.emplace_back("basis.nonoverlap", cfg.nonoverlap_filter ? "true" : "false");
  out.emplace_back("pod.l", std::to_string(cfg.pod_l));
  out.emplace_back("samples.n_train", std::to_string(cfg.n_train));
  out.emplace_back("samples.train_seed", std::to_string(cfg.train_seed));
  out.emplace_back("samples.n_eval", std::to_string(cfg.n_eval));
  out.emplace_back("samples.eval_seed", std::to_string(cfg.eval_seed));
  out.emplace_back("samples.selection",
                   cfg.selection == SampleSelection::kIid ? "iid" : "farthest");
  out.emplace_back("samples.allow_seed_overlap", cfg.allow_seed_overlap ? "true" : "false");
  out.emplace_back("source.f", fmt(cfg.f_value));
  out.emplace_back("source.g", fmt(cfg.g_value));
  out.emplace_back("run.workers", std::to_string(cfg.workers));
  out.emplace_back("run.direct_max_dim", std::to_string(cfg.solver.direct_max_dim));
  out.emplace_back("run.cg_tol", fmt(cfg.solver.cg_tol));
  return out;
}

}  // namespace msrom
