#pragma once

#include "bosmos/belief.hpp"
#include "bosmos/model.hpp"

#include <vector>

namespace testing {

using namespace bosmos;

/// Bernoulli(p) responses with p ~ Beta(a, b) on [0, 1].
inline ModelSpec bernoulli_model(std::string name, int index, double a = 1.0, double b = 1.0) {
  ModelSpec m;
  m.id = {std::move(name), index};
  m.params = {{"p", 0.0, 1.0, Prior::beta(a, b)}};
  m.simulate = [](const Vector& theta, const DesignVector&, Rng& rng) {
    ResponseVector x(1);
    x[0] = uniform01(rng) < theta[0] ? 1.0 : 0.0;
    return x;
  };
  m.log_likelihood = [](const ResponseVector& x, const Vector& theta, const DesignVector&) {
    return x[0] > 0.5 ? std::log(theta[0]) : std::log1p(-theta[0]);
  };
  m.response_support = std::vector<ResponseVector>{Vector::Constant(1, 0.0), Vector::Constant(1, 1.0)};
  return m;
}

/// Box [0, 1]^dim for hand-built particle sets.
inline ModelBox unit_box(std::string name, int index, int dim) {
  return {{std::move(name), index}, Vector::Zero(dim), Vector::Ones(dim)};
}

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

/// A fixed history of t trials, for rules that only need its length.
inline std::vector<TrialRecord> history_of(int t) {
  std::vector<TrialRecord> h;
  for (int i = 1; i <= t; ++i) h.push_back({Vector::Zero(1), Vector::Zero(1), i, 0});
  return h;
}

}  // namespace testing
