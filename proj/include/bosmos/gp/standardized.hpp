#pragma once

#include "bosmos/gp/gaussian_process.hpp"

#include <span>

namespace bosmos::gp {

/// Zero-mean GP fit to (y - offset) / scale. Predictions are mapped back to target units.
struct StandardizedGp {
  GpModel gp;
  double offset = 0.0;
  double scale = 1.0;

  Prediction<double> predict(const Vector& x) const {
    const auto p = gp.predict(x);
    return {offset + scale * p.mean, scale * scale * p.variance};
  }
  double predict_mean(const Vector& x) const { return offset + scale * gp.predict_mean(x); }
  std::pair<Vector, Vector> predict_many(const Matrix& xs) const {
    auto [m, v] = gp.predict_many(xs);
    return {(offset + scale * m.array()).matrix(), (scale * scale * v.array()).matrix()};
  }
  /// Observation noise in target units.
  double noise_variance() const { return scale * scale * gp.noise_variance(); }
};

inline constexpr double kDefaultNoiseGrid[] = {1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5, 1.0};

/// Standardizes the targets, then picks the noise variance (standardized units) from the grid
/// by marginal likelihood. Kernel hyperparameters stay fixed.
StandardizedGp fit_standardized(const Matrix& inputs, const Vector& targets, const Kernel<double>& kernel,
                                std::span<const double> noise_grid = kDefaultNoiseGrid);

}  // namespace bosmos::gp
