#pragma once

#include "bosmos/belief.hpp"
#include "bosmos/design.hpp"
#include "bosmos/lfi.hpp"
#include "bosmos/tasks.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace bosmos {

/// Bosmos: simulator utility + likelihood-free update.
/// Ado: mutual-information design + exact update. Lbird: random design + exact update.
/// Prior: random design, no update. Random: random design + likelihood-free update.
enum class Method { Bosmos, Ado, Lbird, Prior, Random };

std::string_view method_name(Method m);
/// Case-insensitive. Throws ConfigError for unknown names.
Method parse_method(std::string_view name);
/// Throws ConfigError when the task cannot support the method (e.g. ADO without likelihoods).
void check_method_supported(const Task& task, Method method);

struct EngineConfig {
  int n_particles = 5000;
  double jitter_scale = 0.01;
  UtilityEvalConfig utility;
  SimulationBudget inference;
  int marginal_draws = 512;
  MarginalRule marginal_rule = MarginalRule::KernelOfMean;
  int ado_theta = 500;
  double map_bandwidth = 0.0;  // <= 0: Silverman
};

struct DesignProposal {
  DesignVector design;
  nlohmann::json trace;
  long n_sims = 0;
};

DesignProposal propose_design(const Task& task, Method method, const ParticleSet& belief, const EngineConfig& cfg,
                              std::uint64_t rng_seed);

struct UpdateResult {
  ParticleSet belief;
  nlohmann::json diagnostics;
  bool degenerate = false;
  long n_sims = 0;
};

/// One posterior step for the observed trial, followed by resampling with jitter.
UpdateResult update_belief(const Task& task, Method method, const ParticleSet& belief, const TrialRecord& trial,
                           const EngineConfig& cfg, std::uint64_t rng_seed);

/// Particles drawn from the task priors.
ParticleSet initial_belief(const Task& task, const EngineConfig& cfg, std::uint64_t rng_seed);

}  // namespace bosmos
