#include "bosmos/gp/acquisition.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <optional>

namespace bosmos::gp {

namespace {

constexpr std::array<int, 16> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

double min_distance(const Vector& x, const std::vector<Vector>& others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : others) best = std::min(best, (x - o).norm());
  return best;
}

}  // namespace

std::vector<Vector> halton_points(int dim, int n, std::uint64_t seed) {
  if (dim > static_cast<int>(kPrimes.size())) throw std::invalid_argument("halton_points supports at most 16 dimensions");
  Rng rng(seed);
  Vector shift(dim);
  for (int d = 0; d < dim; ++d) shift[d] = uniform01(rng);
  std::vector<Vector> pts(n, Vector(dim));
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) {
      const double v = radical_inverse(static_cast<std::uint64_t>(i) + 1, kPrimes[d]) + shift[d];
      pts[i][d] = v - std::floor(v);
    }
  return pts;
}

Vector pattern_search(const std::function<double(const Vector&)>& objective, Vector start, double start_value,
                      int max_evals, double initial_step, double min_step) {
  Vector best = std::move(start);
  double best_value = start_value;
  double step = initial_step;
  int evals = 0;
  while (step >= min_step && evals < max_evals) {
    bool improved = false;
    for (int d = 0; d < best.size() && evals < max_evals; ++d) {
      for (double sign : {1.0, -1.0}) {
        Vector trial = best;
        trial[d] = std::clamp(trial[d] + sign * step, 0.0, 1.0);
        if (trial[d] == best[d]) continue;
        const double v = objective(trial);
        ++evals;
        if (v < best_value) {
          best_value = v;
          best = std::move(trial);
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

double lower_confidence_bound(const GpModel& gp, const Vector& x, double exploration_weight) {
  const auto p = gp.predict(x);
  return p.mean - exploration_weight * std::sqrt(p.variance);
}

NoisyExpectedImprovement::NoisyExpectedImprovement(const GpModel& gp, int mc_samples, std::uint64_t seed)
    : gp_(gp), base_(gp.size() + 1, std::max(1, mc_samples)) {
  Rng rng(seed);
  for (Eigen::Index j = 0; j < base_.cols(); ++j)
    for (Eigen::Index i = 0; i < base_.rows(); ++i) base_(i, j) = standard_normal(rng);
}

double NoisyExpectedImprovement::operator()(const Vector& x) const {
  const int n = gp_.size();
  Matrix pts(gp_.dim(), n + 1);
  pts.leftCols(n) = gp_.inputs();
  pts.col(n) = x;
  auto [mean, cov] = gp_.joint_posterior(pts);
  // Symmetric square root; tolerates the near-singular covariance at observed points.
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Matrix samples = (root * base_).colwise() + mean;
  double total = 0.0;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    const double incumbent = samples.col(j).head(n).minCoeff();
    total += std::max(0.0, incumbent - samples(n, j));
  }
  return total / static_cast<double>(samples.cols());
}

std::vector<Vector> propose_batch(const GpModel& gp, const AcquisitionSpec& spec, std::uint64_t rng_seed) {
  if (spec.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  const int dim = gp.dim();
  const double signal_sd = std::sqrt(gp.kernel().signal_variance);
  const double radius = 0.5 * gp.kernel().lengthscales.minCoeff();

  std::function<double(const Vector&)> base;
  double amplitude = signal_sd;
  std::optional<NoisyExpectedImprovement> nei;
  if (spec.kind == AcquisitionKind::LCB) {
    base = [&](const Vector& x) { return lower_confidence_bound(gp, x, spec.exploration_weight); };
    amplitude = (1.0 + spec.exploration_weight) * signal_sd;
  } else {
    nei.emplace(gp, spec.mc_samples, derive_seed(rng_seed, 0x6e6569));
    base = [&](const Vector& x) { return -(*nei)(x); };
  }

  const auto starts = halton_points(dim, std::max(1, spec.restarts), rng_seed);
  std::vector<Vector> chosen;
  for (int b = 0; b < spec.batch_size; ++b) {
    auto objective = [&](const Vector& x) {
      double v = base(x);
      for (const auto& c : chosen) v += amplitude * std::exp(-(x - c).squaredNorm() / (2.0 * radius * radius));
      return v;
    };
    std::vector<double> values(starts.size());
    for (std::size_t i = 0; i < starts.size(); ++i) values[i] = objective(starts[i]);
    std::vector<int> order(starts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int c) { return values[a] < values[c]; });

    Vector best = starts[order.front()];
    double best_value = values[order.front()];
    const int refine = std::min<int>(spec.refined_starts, static_cast<int>(order.size()));
    for (int r = 0; r < refine; ++r) {
      Vector cand = pattern_search(objective, starts[order[r]], values[order[r]], spec.local_evals);
      const double v = objective(cand);
      if (v < best_value) {
        best_value = v;
        best = std::move(cand);
      }
    }
    if (min_distance(best, chosen) <= 1e-6) {
      for (int idx : order)
        if (min_distance(starts[idx], chosen) > 1e-6) {
          best = starts[idx];
          break;
        }
    }
    chosen.push_back(std::move(best));
  }
  return chosen;
}

}  // namespace bosmos::gp
