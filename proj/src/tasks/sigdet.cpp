#include "bosmos/tasks.hpp"

#include <algorithm>

namespace bosmos {

namespace sigdet {

namespace {

constexpr double kMinHit = 1.01;
constexpr double kMaxHit = 7.0;

int cap(int max_observations) { return std::max(1, max_observations); }

// Kalman filter on the latent signal level with prior N(s/2, (s/2)^2); "present" means the
// level lies above the midpoint s/2.
Episode run_kfa(const Vector& theta, double strength, int max_obs, Rng& rng) {
  const double sens = theta[0];
  const double tau = kfa_threshold(theta[1]);
  const double noise_var = sens * sens;
  const double mid = 0.5 * strength;

  Episode ep;
  ep.present = uniform01(rng) < 0.5;
  double mean = mid;
  double var = std::max(mid * mid, 1e-6);
  const int n = cap(max_obs);
  for (int t = 1; t <= n; ++t) {
    const double obs = (ep.present ? strength : 0.0) + sens * standard_normal(rng);
    const double gain = var / (var + noise_var);
    mean += gain * (obs - mean);
    var *= 1.0 - gain;
    const double p_present = normal_cdf((mean - mid) / std::sqrt(var));
    ep.looks = t - 1;
    if (t == n) {
      ep.decision = p_present >= 0.5 ? 1 : 0;
      break;
    }
    if (p_present >= tau && p_present >= 0.5) {
      ep.decision = 1;
      break;
    }
    if (1.0 - p_present >= tau) {
      ep.decision = 0;
      break;
    }
  }
  return ep;
}

// Deterministic given theta and design: the ratio is a fixed CDF evaluation per observation, so
// only the signal-presence coin is random. At the cap the nearer threshold wins.
Episode run_pr(const Vector& theta, double strength, int max_obs, Rng& rng) {
  const double low = theta[2];
  const double high = theta[2] + theta[3];
  const double ratio = pr_ratio(theta[0], theta[1], strength);

  Episode ep;
  ep.present = uniform01(rng) < 0.5;
  double f = 1.0;
  const int n = cap(max_obs);
  for (int t = 1; t <= n; ++t) {
    f *= ratio;
    ep.looks = t - 1;
    if (f <= low) {
      ep.decision = 1;
      break;
    }
    if (f >= high) {
      ep.decision = 0;
      break;
    }
    if (t == n) ep.decision = std::abs(f - low) <= std::abs(f - high) ? 1 : 0;
  }
  return ep;
}

}  // namespace

double kfa_threshold(double theta_hit) { return theta_hit / (theta_hit + 2.0); }

double pr_ratio(double theta_sens, double theta_hit, double strength) {
  const double hit = std::clamp(theta_hit, kMinHit, kMaxHit);
  const double point = 1.0 / (hit - 1.0);
  const double present = normal_cdf(point, strength, theta_sens);
  const double absent = normal_cdf(point, 0.0, theta_sens);
  return present / absent;
}

Episode run_episode(Agent agent, const Vector& theta, double strength, int max_observations, Rng& rng) {
  return agent == Agent::KalmanFilter ? run_kfa(theta, strength, max_observations, rng)
                                      : run_pr(theta, strength, max_observations, rng);
}

}  // namespace sigdet

Task make_sigdet_task() {
  using sigdet::Agent;
  auto make_model = [](std::string name, int index, Agent agent, std::vector<ParamDim> params) {
    ModelSpec m;
    m.id = {std::move(name), index};
    m.params = std::move(params);
    m.simulate = [agent](const Vector& theta, const DesignVector& d, Rng& rng) {
      const auto ep = sigdet::run_episode(agent, theta, d[0], static_cast<int>(std::lround(d[1])), rng);
      ResponseVector x(2);
      x << ep.decision, ep.looks;
      return x;
    };
    return m;
  };

  const ParamDim sens{"theta_sens", 0.1, 1.0, Prior::uniform()};
  const ParamDim hit{"theta_hit", 1.0, 7.0, Prior::uniform()};
  const ParamDim low{"theta_low", 0.0, 5.0, Prior::uniform()};
  const ParamDim len{"theta_len", 0.0, 5.0, Prior::uniform()};

  Task t;
  t.name = "sigdet";
  t.models = {make_model("KFA", 0, Agent::KalmanFilter, {sens, hit}),
              make_model("PR", 1, Agent::ProbabilityRatio, {sens, hit, low, len})};
  t.design_space = DesignSpace({{"signal_strength", 0.0, 4.0, false}, {"max_observations", 2.0, 10.0, true}});
  t.model_prior = Vector::Constant(2, 0.5);
  t.response_scale = (Vector(2) << 1.0, 10.0).finished();
  t.render_hint = [](const DesignVector& d) {
    return nlohmann::json{{"kind", "sigdet"}, {"signal_strength", d[0]}, {"max_observations", std::lround(d[1])}};
  };
  t.validate_response = [](const ResponseVector& x, const DesignVector& d) {
    if (x.size() != 2) throw std::invalid_argument("sigdet response must be [decision, looks]");
    if (x[0] != 0.0 && x[0] != 1.0) throw std::invalid_argument("sigdet decision must be 0 or 1");
    if (x[1] != std::round(x[1]) || x[1] < 0 || x[1] > d[1] - 1)
      throw std::invalid_argument("sigdet looks must be an integer in [0, max_observations - 1]");
  };
  return t;
}

}  // namespace bosmos
