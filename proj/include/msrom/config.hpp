#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msrom/pipeline.hpp"

namespace msrom {

/// Raw "section.key" -> value pairs from an INI-style file ([section],
/// key = value, # or ; comments).
using RawConfig = std::map<std::string, std::string>;

RawConfig parse_config_file(const std::string& path);

/// Applies "section.key=value" override strings (CLI flags win over file).
void apply_overrides(RawConfig& raw, const std::vector<std::string>& overrides);

/// Validates against the full key schema (unknown keys are rejected with
/// their path), fills defaults, and cross-checks invariants; the mesh
/// divisibility requirements are enforced here too.
RunConfig resolve_run_config(const RawConfig& raw);

/// Canonical echo of every resolved key, in schema order.
std::vector<std::pair<std::string, std::string>> echo_config(const RunConfig& cfg);

}  // namespace msrom
