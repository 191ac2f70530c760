#include "bosmos/tasks.hpp"

namespace bosmos {

double demo::simulate(bool positive_mean, double theta_mu, double d, Rng& rng) {
  const double mean = positive_mean ? theta_mu : -theta_mu;
  return mean + d * standard_normal(rng);
}

Task make_demo_task() {
  auto make_model = [](std::string name, int index, bool positive) {
    ModelSpec m;
    m.id = {std::move(name), index};
    m.params = {{"theta_mu", 0.0, 5.0, Prior::uniform()}};
    m.simulate = [positive](const Vector& theta, const DesignVector& d, Rng& rng) {
      return ResponseVector::Constant(1, demo::simulate(positive, theta[0], d[0], rng));
    };
    m.log_likelihood = [positive](const ResponseVector& x, const Vector& theta, const DesignVector& d) {
      return log_normal_pdf(x[0], positive ? theta[0] : -theta[0], d[0]);
    };
    return m;
  };

  Task t;
  t.name = "demo";
  t.models = {make_model("PM", 0, true), make_model("NM", 1, false)};
  t.design_space = DesignSpace({{"noise_sd", 0.001, 5.0, false}});
  t.model_prior = Vector::Constant(2, 0.5);
  // Noise-free responses span [-5, 5].
  t.response_scale = Vector::Constant(1, 10.0);
  // Responses are continuous; resolve down to the smallest design noise (0.001 raw).
  t.entropy_bandwidth_floor = 1e-4;
  t.render_hint = [](const DesignVector& d) { return nlohmann::json{{"kind", "demo"}, {"noise_sd", d[0]}}; };
  t.validate_response = [](const ResponseVector& x, const DesignVector&) {
    if (x.size() != 1 || !std::isfinite(x[0])) throw std::invalid_argument("demo response must be one finite number");
  };
  return t;
}

}  // namespace bosmos
