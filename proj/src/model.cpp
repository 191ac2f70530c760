#include "bosmos/model.hpp"

#include <algorithm>

namespace bosmos {

double ParamDim::sample(Rng& rng) const {
  switch (prior.kind) {
    case Prior::Kind::Beta:
      return lower + width() * sample_beta(prior.a, prior.b, rng);
    case Prior::Kind::Uniform:
      break;
  }
  return std::uniform_real_distribution<double>(lower, upper)(rng);
}

double ParamDim::log_density(double x) const {
  if (x < lower || x > upper) return -std::numeric_limits<double>::infinity();
  if (prior.kind == Prior::Kind::Uniform) return -std::log(width());
  const double u = (x - lower) / width();
  const double log_norm = std::lgamma(prior.a + prior.b) - std::lgamma(prior.a) - std::lgamma(prior.b);
  return log_norm + (prior.a - 1.0) * std::log(u) + (prior.b - 1.0) * std::log1p(-u) - std::log(width());
}

DesignVector DesignSpace::sample(Rng& rng) const {
  DesignVector d(dim());
  for (int i = 0; i < dim(); ++i) {
    const auto& dd = dims_[i];
    if (dd.integer) {
      d[i] = static_cast<double>(std::uniform_int_distribution<long>(std::lround(dd.lower), std::lround(dd.upper))(rng));
    } else {
      d[i] = std::uniform_real_distribution<double>(dd.lower, dd.upper)(rng);
    }
  }
  return d;
}

DesignVector DesignSpace::from_unit(const Vector& u) const {
  DesignVector d(dim());
  for (int i = 0; i < dim(); ++i) {
    const auto& dd = dims_[i];
    const double t = std::clamp(u[i], 0.0, 1.0);
    double v = dd.lower + t * (dd.upper - dd.lower);
    if (dd.integer) v = std::clamp(std::round(v), dd.lower, dd.upper);
    d[i] = v;
  }
  return d;
}

Vector DesignSpace::to_unit(const DesignVector& d) const {
  Vector u(dim());
  for (int i = 0; i < dim(); ++i) {
    const auto& dd = dims_[i];
    const double w = dd.upper - dd.lower;
    u[i] = w > 0 ? (d[i] - dd.lower) / w : 0.0;
  }
  return u;
}

bool DesignSpace::contains(const DesignVector& d) const {
  if (d.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    const auto& dd = dims_[i];
    if (!(d[i] >= dd.lower && d[i] <= dd.upper)) return false;
    if (dd.integer && d[i] != std::round(d[i])) return false;
  }
  return true;
}

Vector ModelSpec::lower() const {
  Vector v(dim());
  for (int i = 0; i < dim(); ++i) v[i] = params[i].lower;
  return v;
}

Vector ModelSpec::upper() const {
  Vector v(dim());
  for (int i = 0; i < dim(); ++i) v[i] = params[i].upper;
  return v;
}

Vector ModelSpec::sample_prior(Rng& rng) const {
  Vector theta(dim());
  for (int i = 0; i < dim(); ++i) theta[i] = params[i].sample(rng);
  return theta;
}

bool ModelSpec::in_box(const Vector& theta) const {
  if (theta.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (!(theta[i] >= params[i].lower && theta[i] <= params[i].upper)) return false;
  return true;
}

}  // namespace bosmos
