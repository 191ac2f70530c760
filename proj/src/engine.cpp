#include "bosmos/engine.hpp"

#include <algorithm>
#include <cctype>

namespace bosmos {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Bosmos: return "bosmos";
    case Method::Ado: return "ado";
    case Method::Lbird: return "lbird";
    case Method::Prior: return "prior";
    case Method::Random: return "random";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Method m : {Method::Bosmos, Method::Ado, Method::Lbird, Method::Prior, Method::Random})
    if (method_name(m) == lower) return m;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected bosmos, ado, lbird, prior or random)");
}

void check_method_supported(const Task& task, Method method) {
  if (method == Method::Ado && !(task.has_exact_likelihoods() && task.has_finite_responses()))
    throw ConfigError("method ado requires exact likelihoods over a finite response set; task '" + task.name +
                      "' does not provide them");
  if (method == Method::Lbird && !task.has_exact_likelihoods())
    throw ConfigError("method lbird requires exact likelihoods; task '" + task.name + "' is simulator-only");
}

ParticleSet initial_belief(const Task& task, const EngineConfig& cfg, std::uint64_t rng_seed) {
  return init_from_priors(task.models, cfg.n_particles, derive_seed(rng_seed, Stream::Init), task.model_prior);
}

DesignProposal propose_design(const Task& task, Method method, const ParticleSet& belief, const EngineConfig& cfg,
                              std::uint64_t rng_seed) {
  DesignProposal out;
  switch (method) {
    case Method::Bosmos: {
      auto choice = select_design_bosmos(belief, task, cfg.utility, rng_seed);
      out.design = choice.design;
      out.trace = choice.trace();
      out.n_sims = choice.n_sims;
      break;
    }
    case Method::Ado: {
      auto choice = select_design_ado(belief, task, cfg.utility, cfg.ado_theta, rng_seed);
      out.design = choice.design;
      out.trace = choice.trace();
      break;
    }
    case Method::Lbird:
    case Method::Prior:
    case Method::Random:
      out.design = select_design_random(task, rng_seed);
      out.trace = {{"candidates", nlohmann::json::array()},
                   {"chosen", std::vector<double>(out.design.data(), out.design.data() + out.design.size())}};
      break;
  }
  return out;
}

namespace {

UpdateResult likelihood_free_update(const Task& task, const ParticleSet& belief, const TrialRecord& trial,
                                    const EngineConfig& cfg, std::uint64_t rng_seed) {
  const Discrepancy rho{task.response_scale};
  std::vector<LikelihoodApprox> approxes;
  long sims = 0;
  for (int k : belief.live_models()) {
    approxes.push_back(build_surrogate(task.models[k], belief, k, trial.response, trial.design, rho, cfg.inference,
                                       derive_seed(rng_seed, Stream::Inference, static_cast<std::uint64_t>(k)),
                                       trial.trial_index));
    sims += approxes.back().n_sims;
  }
  const auto report = marginal_likelihood(approxes, belief, cfg.marginal_draws,
                                          derive_seed(rng_seed, Stream::Marginal), cfg.marginal_rule);
  UpdateResult out{belief, diagnostics_json(trial.trial_index, approxes, report), false, sims};
  try {
    out.belief = posterior_update(belief, approxes, report);
  } catch (const DegenerateUpdate&) {
    out.degenerate = true;
  }
  return out;
}

UpdateResult exact_update(const Task& task, const ParticleSet& belief, const TrialRecord& trial) {
  UpdateResult out{belief, {{"trial", trial.trial_index}}, false, 0};
  try {
    out.belief = reweight_log(belief, [&](const Particle& p) {
      return (*task.models[p.model].log_likelihood)(trial.response, p.theta, trial.design);
    });
  } catch (const DegenerateUpdate&) {
    out.degenerate = true;
  }
  return out;
}

}  // namespace

UpdateResult update_belief(const Task& task, Method method, const ParticleSet& belief, const TrialRecord& trial,
                           const EngineConfig& cfg, std::uint64_t rng_seed) {
  UpdateResult out{belief, {{"trial", trial.trial_index}}, false, 0};
  switch (method) {
    case Method::Prior:
      return out;
    case Method::Bosmos:
    case Method::Random:
      out = likelihood_free_update(task, belief, trial, cfg, rng_seed);
      break;
    case Method::Ado:
    case Method::Lbird:
      check_method_supported(task, method);
      out = exact_update(task, belief, trial);
      break;
  }
  out.diagnostics["degenerate"] = out.degenerate;
  if (!out.degenerate)
    out.belief = resample_with_jitter(out.belief, cfg.jitter_scale, derive_seed(rng_seed, Stream::Resample));
  const Vector marg = out.belief.model_marginals();
  out.diagnostics["model_marginals"] = std::vector<double>(marg.data(), marg.data() + marg.size());
  return out;
}

}  // namespace bosmos
