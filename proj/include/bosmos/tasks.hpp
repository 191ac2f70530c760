#pragma once

#include "bosmos/model.hpp"

#include "json.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace bosmos {

/// A cognitive task: its candidate models, design space and response conventions.
struct Task {
  std::string name;
  std::vector<ModelSpec> models;
  DesignSpace design_space;
  Vector model_prior;
  /// Per-component response scale; responses are divided by it before distances and entropies.
  Vector response_scale;
  /// Lower bound on the entropy kernel bandwidth, in scaled response units. The default suits
  /// discrete responses, where ties would otherwise collapse the mixture.
  double entropy_bandwidth_floor = 0.05;
  std::function<nlohmann::json(const DesignVector&)> render_hint;
  /// Throws std::invalid_argument when a response is not admissible at this design.
  std::function<void(const ResponseVector&, const DesignVector&)> validate_response;

  int num_models() const { return static_cast<int>(models.size()); }
  int model_index(std::string_view model_name) const;
  bool has_exact_likelihoods() const;
  bool has_finite_responses() const;
  Vector scaled(const ResponseVector& x) const { return (x.array() / response_scale.array()).matrix(); }
  nlohmann::json describe() const;
};

/// Registry keyed by "demo", "memory", "sigdet", "risky". Throws ConfigError for unknown names.
const Task& find_task(std::string_view name);
std::vector<std::string> task_names();

Task make_demo_task();
Task make_memory_task();
Task make_sigdet_task();
Task make_risky_task();

namespace demo {
/// x ~ N(+theta, d^2) for the positive-mean model, N(-theta, d^2) for the negative one.
double simulate(bool positive_mean, double theta_mu, double d, Rng& rng);
}  // namespace demo

namespace memory {
enum class Retention { Power, Exponential };
/// Recall probability theta_a (d+1)^-theta_pow, or theta_a e^(-theta_exp d).
double recall_probability(Retention model, double theta_a, double decay, double d);
}  // namespace memory

namespace sigdet {
enum class Agent { KalmanFilter, ProbabilityRatio };

struct Episode {
  bool present = false;
  int decision = 0;  // 1 = "present"
  int looks = 0;
};

/// One episode at design (signal strength, observation cap). Signal presence is a fair coin.
Episode run_episode(Agent agent, const Vector& theta, double strength, int max_observations, Rng& rng);
/// Decision threshold on P(present) for the Kalman-filter agent.
double kfa_threshold(double theta_hit);
/// Per-observation likelihood ratio of the probability-ratio agent.
double pr_ratio(double theta_sens, double theta_hit, double strength);
}  // namespace sigdet

namespace risky {
enum class Theory { EU, WEU, OPT, CPT };
enum class Preference { A, Indifferent, B };

struct Lottery {
  double p_low = 0.0;
  double p_mid = 0.0;
  double p_high = 0.0;
};

/// Raw (low, high) design values -> probability triple with p_mid = 2 - low - high, rescaled to sum 1.
Lottery lottery_from_design(double d_low, double d_high);
/// Rescales a triple to sum to one; idempotent.
Lottery normalized(const Lottery& l);
double weighting(double p, double theta_r);
double opt_utility(const Lottery& l, double theta_v, double theta_r);
double cpt_utility(double p_high, double p_low, double theta_v, double theta_r);
Preference preference(Theory theory, const Vector& theta, const Lottery& a, const Lottery& b);
/// Probability of choosing lottery A: 1-eps, eps or 1/2.
double choose_a_probability(Theory theory, const Vector& theta, const DesignVector& design);
}  // namespace risky

}  // namespace bosmos
