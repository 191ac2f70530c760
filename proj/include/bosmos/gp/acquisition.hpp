#pragma once

#include "bosmos/gp/gaussian_process.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace bosmos::gp {

enum class AcquisitionKind { LCB, NoisyEI };

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::LCB;
  double exploration_weight = 2.0;  // LCB only
  int mc_samples = 128;             // NoisyEI only
  int batch_size = 1;
  int restarts = 64;
  int refined_starts = 4;
  int local_evals = 48;
};

/// Points of a scrambled Halton sequence in [0, 1]^dim.
std::vector<Vector> halton_points(int dim, int n, std::uint64_t seed);

/// Compass search on the unit cube; returns the best point found.
Vector pattern_search(const std::function<double(const Vector&)>& objective, Vector start, double start_value,
                      int max_evals, double initial_step = 0.1, double min_step = 1e-3);

/// LCB value mu - w * sqrt(nu); lower is better.
double lower_confidence_bound(const GpModel& gp, const Vector& x, double exploration_weight);

/// Monte-Carlo noisy expected improvement for minimization, with fixed base samples so the
/// estimate is a deterministic function of x.
class NoisyExpectedImprovement {
 public:
  NoisyExpectedImprovement(const GpModel& gp, int mc_samples, std::uint64_t seed);
  double operator()(const Vector& x) const;

 private:
  const GpModel& gp_;
  Matrix base_;  // (n + 1) x mc_samples standard normals
};

/// Proposes batch_size points in the unit cube. Within a batch, earlier picks repel later ones.
std::vector<Vector> propose_batch(const GpModel& gp, const AcquisitionSpec& spec, std::uint64_t rng_seed);

}  // namespace bosmos::gp
