#pragma once

#include "bosmos/common.hpp"
#include "bosmos/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace bosmos {

/// Identity and prior box of one candidate model, carried by the particle set.
struct ModelBox {
  ModelId id;
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }
  Vector width() const { return upper - lower; }
  Vector to_unit(const Vector& theta) const;
  Vector from_unit(const Vector& u) const;
};

struct Particle {
  int model = 0;
  Vector theta;
  double weight = 0.0;
};

struct TrialRecord {
  DesignVector design;
  ResponseVector response;
  int trial_index = 0;
  std::int64_t wall_time_ms = 0;
};

struct Estimate {
  ModelId model;
  Vector theta;
};

/// Weighted particles over (model, parameters). Immutable once built; weights sum to 1.
class ParticleSet {
 public:
  ParticleSet(std::vector<ModelBox> models, std::vector<Particle> particles);

  int size() const { return static_cast<int>(particles_.size()); }
  int num_models() const { return static_cast<int>(models_.size()); }
  const std::vector<Particle>& particles() const { return particles_; }
  const Particle& operator[](int i) const { return particles_[i]; }
  const std::vector<ModelBox>& models() const { return models_; }
  const ModelBox& model(int k) const { return models_[k]; }

  Vector weights() const;
  /// Summed particle weight per model.
  Vector model_marginals() const;
  std::vector<int> particle_counts() const;
  /// A model is alive while it still owns at least one particle.
  bool alive(int k) const;
  std::vector<int> live_models() const;
  double effective_sample_size() const;

  /// Particles of model k only, renormalized. Throws if the model is dead.
  ParticleSet conditional(int k) const;
  /// Draws parameter vectors of model k proportionally to weight.
  std::vector<Vector> sample_theta(int k, int n, Rng& rng) const;
  /// Draws (model, theta) pairs proportionally to weight.
  std::vector<Particle> sample(int n, Rng& rng) const;

 private:
  std::vector<ModelBox> models_;
  std::vector<Particle> particles_;
};

ParticleSet init_from_priors(std::span<const ModelSpec> models, int n_particles, std::uint64_t rng_seed,
                             std::optional<Vector> model_prior = std::nullopt);

/// new weight ∝ old weight × likelihood. Throws DegenerateUpdate when every product is zero.
ParticleSet reweight(const ParticleSet& belief, const std::function<double(const Particle&)>& likelihood);
/// Same update, with likelihoods supplied on the log scale.
ParticleSet reweight_log(const ParticleSet& belief, const std::function<double(const Particle&)>& log_likelihood);

/// Systematic resampling to equal weights, then Gaussian jitter of sd jitter_scale × box width,
/// clipped to the box. Models whose mass is below 1/N receive no particles.
ParticleSet resample_with_jitter(const ParticleSet& belief, double jitter_scale, std::uint64_t rng_seed);

/// argmax model mass; theta is the kernel-density mode over that model's particles.
/// bandwidth <= 0 selects Silverman's rule per dimension; otherwise it is a bandwidth in
/// box-normalized coordinates.
Estimate map_estimate(const ParticleSet& belief, double bandwidth = 0.0);

/// BIC rule: -2 log(model mass) + dim log(t), t = number of trials observed.
Estimate bic_estimate(const ParticleSet& belief, std::span<const TrialRecord> history);

nlohmann::json to_json(const ParticleSet& belief, std::uint64_t seed, int trial_index);
ParticleSet particle_set_from_json(const nlohmann::json& doc);

}  // namespace bosmos
