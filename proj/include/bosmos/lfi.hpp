#pragma once

#include "bosmos/belief.hpp"
#include "bosmos/gp/standardized.hpp"
#include "bosmos/tasks.hpp"

#include "json.hpp"

#include <cstdint>
#include <vector>

namespace bosmos {

/// Euclidean distance between responses after dividing each component by a scale.
/// Signal-detection responses are already the (decision, looks) summary.
struct Discrepancy {
  Vector scale;

  double operator()(const ResponseVector& a, const ResponseVector& b) const {
    if (scale.size() == 0) return (a - b).norm();
    return ((a - b).array() / scale.array()).matrix().norm();
  }
};

struct SimulationBudget {
  int total = 100;
  int initial = 50;  // drawn from the current belief; the rest come from LCB batches
  int batch_size = 5;
  double exploration_weight = 2.0;
  double lengthscale = 0.2;
};

/// Discrepancy surrogate of one model at one trial, with its acceptance bandwidth epsilon.
struct LikelihoodApprox {
  ModelId model;
  ModelBox box;
  gp::StandardizedGp surrogate;
  double epsilon = 0.0;
  int n_sims = 0;
  int trial_index = 0;

  /// Surrogate mean and latent variance of the discrepancy at theta (model coordinates).
  gp::Prediction<double> predict(const Vector& theta) const { return surrogate.predict(box.to_unit(theta)); }
};

/// Phi((epsilon - mu) / sqrt(nu + sigma^2)) on the log scale.
double log_parameter_likelihood(const LikelihoodApprox& approx, const Vector& theta);
double evaluate_parameter_likelihood(const LikelihoodApprox& approx, const Vector& theta);

/// Fits the discrepancy surrogate for model k of the belief at the observed (design, response).
LikelihoodApprox build_surrogate(const ModelSpec& model, const ParticleSet& belief, int k,
                                 const ResponseVector& observed, const DesignVector& design,
                                 const Discrepancy& discrepancy, const SimulationBudget& budget,
                                 std::uint64_t rng_seed, int trial_index = 0);

/// KernelOfMean applies the kernel to the expected discrepancy omega_m. ExpectedKernel averages
/// the kernel over the surrogate's predictive distribution of the discrepancy, so simulator noise
/// captured by the GP enters the model evidence.
enum class MarginalRule { KernelOfMean, ExpectedKernel };

struct MarginalLikelihoodReport {
  Vector omega;     // expected discrepancy per model; NaN for dead models
  Vector kappa;     // exp(-omega^2 / (2 eta^2)); 0 for dead models
  Vector evidence;  // per-model factor applied by posterior_update
  double eta = 0.0;
};

/// Unnormalized Gaussian kernel exp(-u^2 / (2 eta^2)).
inline double gaussian_kernel(double u, double eta) { return std::exp(-u * u / (2.0 * eta * eta)); }

/// Shared-bandwidth kernel values from per-model expected discrepancies (NaN = dead model).
MarginalLikelihoodReport kernel_report(const Vector& omega);

/// omega_m is the average clamped surrogate mean over n_draws thetas from model m's particles.
MarginalLikelihoodReport marginal_likelihood(const std::vector<LikelihoodApprox>& approxes, const ParticleSet& belief,
                                             int n_draws, std::uint64_t rng_seed,
                                             MarginalRule rule = MarginalRule::KernelOfMean);

/// E[exp(-r^2 / (2 eta^2))] for r ~ N(mean, var).
inline double expected_gaussian_kernel(double mean, double var, double eta) {
  const double s = eta * eta + var;
  return eta / std::sqrt(s) * std::exp(-mean * mean / (2.0 * s));
}

/// Multiplies each particle weight by its parameter likelihood and its model's evidence factor.
/// Throws DegenerateUpdate when every product vanishes.
ParticleSet posterior_update(const ParticleSet& belief, const std::vector<LikelihoodApprox>& approxes,
                             const MarginalLikelihoodReport& report);

nlohmann::json diagnostics_json(int trial, const std::vector<LikelihoodApprox>& approxes,
                                const MarginalLikelihoodReport& report);

}  // namespace bosmos
