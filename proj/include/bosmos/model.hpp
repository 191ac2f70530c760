#pragma once

#include "bosmos/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bosmos {

struct ModelId {
  std::string name;
  int index = 0;

  friend bool operator==(const ModelId&, const ModelId&) = default;
};

/// Box-bounded prior on one parameter. Beta priors are rescaled onto [lower, upper].
struct Prior {
  enum class Kind { Uniform, Beta };
  Kind kind = Kind::Uniform;
  double a = 1.0;
  double b = 1.0;

  static Prior uniform() { return {}; }
  static Prior beta(double a, double b) { return {Kind::Beta, a, b}; }
};

struct ParamDim {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Prior prior;

  double width() const { return upper - lower; }
  double sample(Rng& rng) const;
  double log_density(double x) const;
};

/// One design coordinate: continuous bounds, or an inclusive integer range.
struct DesignDim {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  bool integer = false;
};

using DesignVector = Vector;
using ResponseVector = Vector;

class DesignSpace {
 public:
  DesignSpace() = default;
  explicit DesignSpace(std::vector<DesignDim> dims) : dims_(std::move(dims)) {}

  int dim() const { return static_cast<int>(dims_.size()); }
  const std::vector<DesignDim>& dims() const { return dims_; }

  /// Uniform proposal p(d); integer dimensions are discrete-uniform.
  DesignVector sample(Rng& rng) const;
  /// Unit cube -> design space, rounding integer dimensions.
  DesignVector from_unit(const Vector& u) const;
  Vector to_unit(const DesignVector& d) const;
  bool contains(const DesignVector& d) const;

 private:
  std::vector<DesignDim> dims_;
};

using Simulator = std::function<ResponseVector(const Vector& theta, const DesignVector& design, Rng& rng)>;
/// log p(x | theta, d); a density for continuous responses, a probability for discrete ones.
using ExactLogLikelihood =
    std::function<double(const ResponseVector& x, const Vector& theta, const DesignVector& design)>;

struct ModelSpec {
  ModelId id;
  std::vector<ParamDim> params;
  Simulator simulate;
  std::optional<ExactLogLikelihood> log_likelihood;
  /// Finite response set, present when the response is discrete.
  std::optional<std::vector<ResponseVector>> response_support;

  int dim() const { return static_cast<int>(params.size()); }
  Vector lower() const;
  Vector upper() const;
  Vector sample_prior(Rng& rng) const;
  bool in_box(const Vector& theta) const;
};

}  // namespace bosmos
