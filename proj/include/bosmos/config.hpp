#pragma once

#include "bosmos/eval.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

namespace bosmos {

/// One benchmark run as read from a JSON document.
struct RunConfig {
  BenchmarkOptions benchmark;
  std::filesystem::path out_dir = "results";
};

/// Validates against the task registry and method constraints. Errors are ConfigError with a
/// JSON path prefix, e.g. "$.budgets.particles: expected an integer >= 1".
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Engine settings as stored in session logs and under "budgets" in run configs.
nlohmann::json engine_to_json(const EngineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are errors. `path` prefixes error messages.
EngineConfig engine_from_json(const nlohmann::json& doc, const std::string& path = "$");

std::string_view marginal_rule_name(MarginalRule rule);
MarginalRule parse_marginal_rule(std::string_view name);

}  // namespace bosmos
