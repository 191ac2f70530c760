#include "bosmos/gp/standardized.hpp"

#include <optional>

namespace bosmos::gp {

StandardizedGp fit_standardized(const Matrix& inputs, const Vector& targets, const Kernel<double>& kernel,
                                std::span<const double> noise_grid) {
  if (noise_grid.empty()) throw std::invalid_argument("noise grid is empty");
  StandardizedGp out;
  out.offset = targets.mean();
  const double var = (targets.array() - out.offset).square().mean();
  out.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  const Vector z = (targets.array() - out.offset) / out.scale;

  std::optional<GpModel> best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double noise : noise_grid) {
    try {
      auto gp = GpModel::fit(inputs, z, kernel, noise);
      const double lml = gp.log_marginal_likelihood();
      if (!best || lml > best_lml) {
        best_lml = lml;
        best = std::move(gp);
      }
    } catch (const NumericalError&) {
    }
  }
  if (!best) throw NumericalError("GP fit failed for every noise level");
  out.gp = std::move(*best);
  return out;
}

}  // namespace bosmos::gp
