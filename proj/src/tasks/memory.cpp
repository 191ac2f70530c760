#include "bosmos/tasks.hpp"

#include <algorithm>

namespace bosmos {

double memory::recall_probability(Retention model, double theta_a, double decay, double d) {
  const double p = model == Retention::Power ? theta_a * std::pow(d + 1.0, -decay) : theta_a * std::exp(-decay * d);
  return std::clamp(p, 0.0, 1.0);
}

Task make_memory_task() {
  using memory::Retention;
  auto make_model = [](std::string name, int index, Retention kind, std::string decay_name, Prior decay_prior) {
    ModelSpec m;
    m.id = {std::move(name), index};
    m.params = {{"theta_a", 0.0, 1.0, Prior::beta(2, 1)}, {std::move(decay_name), 0.0, 1.0, decay_prior}};
    m.simulate = [kind](const Vector& theta, const DesignVector& d, Rng& rng) {
      const double p = memory::recall_probability(kind, theta[0], theta[1], d[0]);
      return ResponseVector::Constant(1, uniform01(rng) < p ? 1.0 : 0.0);
    };
    m.log_likelihood = [kind](const ResponseVector& x, const Vector& theta, const DesignVector& d) {
      const double p = memory::recall_probability(kind, theta[0], theta[1], d[0]);
      return std::log(x[0] > 0.5 ? p : 1.0 - p);
    };
    m.response_support = std::vector<ResponseVector>{ResponseVector::Constant(1, 0.0), ResponseVector::Constant(1, 1.0)};
    return m;
  };

  Task t;
  t.name = "memory";
  t.models = {make_model("POW", 0, Retention::Power, "theta_pow", Prior::beta(1, 4)),
              make_model("EXP", 1, Retention::Exponential, "theta_exp", Prior::beta(1, 8))};
  t.design_space = DesignSpace({{"lag", 0.0, 100.0, false}});
  t.model_prior = Vector::Constant(2, 0.5);
  t.response_scale = Vector::Constant(1, 1.0);
  t.render_hint = [](const DesignVector& d) { return nlohmann::json{{"kind", "memory"}, {"lag_seconds", d[0]}}; };
  t.validate_response = [](const ResponseVector& x, const DesignVector&) {
    if (x.size() != 1 || (x[0] != 0.0 && x[0] != 1.0)) throw std::invalid_argument("memory response must be 0 or 1");
  };
  return t;
}

}  // namespace bosmos
