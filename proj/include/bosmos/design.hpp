#pragma once

#include "bosmos/belief.hpp"
#include "bosmos/tasks.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace bosmos {

struct EntropyEstimate {
  double value = 0.0;
  int n_samples = 0;
  double bandwidth = 0.0;
};

inline constexpr double kMinEntropyBandwidth = 0.05;

/// Silverman's rule on the pooled sample (mean per-dimension sd), floored at `floor`.
double silverman_bandwidth(const std::vector<Vector>& samples, double floor = kMinEntropyBandwidth);

/// Differential entropy of the equal-weight Gaussian mixture centred on the samples, each
/// component with covariance bandwidth^2 I. The expectation of -log f under each component is
/// taken by Gauss-Hermite quadrature. bandwidth <= 0 selects silverman_bandwidth.
EntropyEstimate kernel_entropy(const std::vector<Vector>& samples, double bandwidth = 0.0);

struct UtilityEvalConfig {
  int n_model_draws = 10;
  int n_sims_per_draw = 10;
  double entropy_bandwidth = 0.0;  // <= 0 means auto
  int bo_init = 10;
  int bo_steps = 5;
};

struct UtilityValue {
  double value = 0.0;
  long n_sims = 0;
};

/// Expected per-(model, theta) response entropy minus the pooled response entropy at a design.
/// Lower is better.
UtilityValue bosmos_utility(const DesignVector& design, const ParticleSet& belief, const Task& task,
                            const UtilityEvalConfig& cfg, std::uint64_t rng_seed);

struct DesignChoice {
  DesignVector design;
  double utility = 0.0;
  std::vector<std::pair<DesignVector, double>> candidates;
  long n_sims = 0;

  nlohmann::json trace() const;
};

/// bo_init random designs from p(d), then bo_steps noisy-EI steps on a Matern-5/2 surrogate.
/// Returns the evaluated design with the lowest objective.
DesignChoice minimize_over_designs(const DesignSpace& space,
                                   const std::function<UtilityValue(const DesignVector&, std::uint64_t)>& objective,
                                   int bo_init, int bo_steps, std::uint64_t rng_seed);

DesignChoice select_design_bosmos(const ParticleSet& belief, const Task& task, const UtilityEvalConfig& cfg,
                                  std::uint64_t rng_seed);

/// Conditional response probabilities p(y | m, d) averaged over parameter draws per model.
struct AdoSample {
  std::vector<int> models;
  Vector model_prob;
  std::vector<std::vector<Vector>> thetas;  // per entry of models
};

AdoSample ado_sample(const ParticleSet& belief, const Task& task, int n_theta, std::uint64_t rng_seed);

/// Mutual information between model identity and response at a design. Higher is better.
/// Throws UnsupportedModel when a model lacks an exact likelihood or a finite response set.
double ado_utility(const DesignVector& design, const Task& task, const AdoSample& sample);

DesignChoice select_design_ado(const ParticleSet& belief, const Task& task, const UtilityEvalConfig& cfg,
                               int n_theta, std::uint64_t rng_seed);

DesignVector select_design_random(const Task& task, std::uint64_t rng_seed);

}  // namespace bosmos
