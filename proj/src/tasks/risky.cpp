#include "bosmos/tasks.hpp"

#include <algorithm>
#include <limits>

namespace bosmos {

namespace risky {

namespace {

constexpr double kTol = 1e-12;

Preference compare(double utility_a, double utility_b) {
  const double diff = utility_a - utility_b;
  if (std::abs(diff) <= kTol) return Preference::Indifferent;
  return diff > 0 ? Preference::A : Preference::B;
}

// Indifference-curve slope through the common intersection point (x, y).
double weu_slope(const Lottery& l, double x, double y) {
  const double den = std::abs(l.p_low - x);
  const double num = std::abs(l.p_high - y);
  if (den <= kTol) return std::numeric_limits<double>::infinity();
  return num / den;
}

}  // namespace

Lottery normalized(const Lottery& l) {
  const double s = l.p_low + l.p_mid + l.p_high;
  if (!(s > 0)) throw std::invalid_argument("lottery probabilities must have a positive sum");
  return {l.p_low / s, l.p_mid / s, l.p_high / s};
}

Lottery lottery_from_design(double d_low, double d_high) {
  return normalized({d_low, 2.0 - d_low - d_high, d_high});
}

double weighting(double p, double theta_r) {
  p = std::clamp(p, 0.0, 1.0);
  const double a = std::pow(p, theta_r);
  const double b = std::pow(1.0 - p, theta_r);
  return a / std::pow(a + b, 1.0 / theta_r);
}

double opt_utility(const Lottery& l, double theta_v, double theta_r) {
  const double wh = weighting(l.p_high, theta_r);
  if (l.p_low <= 0.0) return wh + theta_v * (1.0 - wh);
  return wh + weighting(1.0 - l.p_high - l.p_low, theta_r) * theta_v;
}

double cpt_utility(double p_high, double p_low, double theta_v, double theta_r) {
  const double wh = weighting(p_high, theta_r);
  return wh + (weighting(1.0 - p_low, theta_r) - wh) * theta_v;
}

Preference preference(Theory theory, const Vector& theta, const Lottery& a, const Lottery& b) {
  switch (theory) {
    case Theory::EU: {
      // Parallel indifference lines of slope theta_a in the (p_low, p_high) triangle. For B riskier
      // than A this reduces to |dp_high| / |dp_low| < theta_a.
      const double gain = (a.p_high - b.p_high) - theta[0] * (a.p_low - b.p_low);
      if (std::abs(gain) <= kTol) return Preference::Indifferent;
      return gain > 0 ? Preference::A : Preference::B;
    }
    case Theory::WEU: {
      const double sa = weu_slope(a, theta[0], theta[1]);
      const double sb = weu_slope(b, theta[0], theta[1]);
      if (std::isinf(sa) && std::isinf(sb)) return Preference::Indifferent;
      return compare(sa, sb);
    }
    case Theory::OPT:
      return compare(opt_utility(a, theta[0], theta[1]), opt_utility(b, theta[0], theta[1]));
    case Theory::CPT:
      return compare(cpt_utility(a.p_high, a.p_low, theta[0], theta[1]),
                     cpt_utility(b.p_high, b.p_low, theta[0], theta[1]));
  }
  return Preference::Indifferent;
}

double choose_a_probability(Theory theory, const Vector& theta, const DesignVector& design) {
  const Lottery a = lottery_from_design(design[0], design[1]);
  const Lottery b = lottery_from_design(design[2], design[3]);
  const double eps = theta[theta.size() - 1];
  switch (preference(theory, theta, a, b)) {
    case Preference::A: return 1.0 - eps;
    case Preference::B: return eps;
    case Preference::Indifferent: return 0.5;
  }
  return 0.5;
}

}  // namespace risky

Task make_risky_task() {
  using risky::Theory;
  auto make_model = [](std::string name, int index, Theory theory, std::vector<ParamDim> params) {
    params.push_back({"theta_eps", 0.0, 0.5, Prior::uniform()});
    ModelSpec m;
    m.id = {std::move(name), index};
    m.params = std::move(params);
    m.simulate = [theory](const Vector& theta, const DesignVector& d, Rng& rng) {
      const double p = risky::choose_a_probability(theory, theta, d);
      return ResponseVector::Constant(1, uniform01(rng) < p ? 1.0 : 0.0);
    };
    m.log_likelihood = [theory](const ResponseVector& x, const Vector& theta, const DesignVector& d) {
      const double p = risky::choose_a_probability(theory, theta, d);
      return std::log(x[0] > 0.5 ? p : 1.0 - p);
    };
    m.response_support = std::vector<ResponseVector>{ResponseVector::Constant(1, 0.0), ResponseVector::Constant(1, 1.0)};
    return m;
  };

  const ParamDim v{"theta_v", 0.0, 1.0, Prior::uniform()};
  const ParamDim r{"theta_r", 0.01, 1.0, Prior::uniform()};

  Task t;
  t.name = "risky";
  t.models = {make_model("EU", 0, Theory::EU, {{"theta_a", 0.0, 10.0, Prior::uniform()}}),
              make_model("WEU", 1, Theory::WEU,
                         {{"theta_x", -100.0, 0.0, Prior::uniform()}, {"theta_y", -100.0, 0.0, Prior::uniform()}}),
              make_model("OPT", 2, Theory::OPT, {v, r}),
              make_model("CPT", 3, Theory::CPT, {v, r})};
  t.design_space = DesignSpace({{"d_plA", 0.0, 1.0, false},
                                {"d_phA", 0.0, 1.0, false},
                                {"d_plB", 0.0, 1.0, false},
                                {"d_phB", 0.0, 1.0, false}});
  t.model_prior = Vector::Constant(4, 0.25);
  t.response_scale = Vector::Constant(1, 1.0);
  t.render_hint = [](const DesignVector& d) {
    auto card = [](const risky::Lottery& l) {
      return nlohmann::json{{"p_low", l.p_low}, {"p_mid", l.p_mid}, {"p_high", l.p_high}};
    };
    return nlohmann::json{{"kind", "risky"},
                          {"lottery_a", card(risky::lottery_from_design(d[0], d[1]))},
                          {"lottery_b", card(risky::lottery_from_design(d[2], d[3]))}};
  };
  t.validate_response = [](const ResponseVector& x, const DesignVector&) {
    if (x.size() != 1 || (x[0] != 0.0 && x[0] != 1.0)) throw std::invalid_argument("risky response must be 1 (A) or 0 (B)");
  };
  return t;
}

}  // namespace bosmos
