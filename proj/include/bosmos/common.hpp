#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace bosmos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// All per-particle likelihoods vanished; the caller keeps the previous belief.
struct DegenerateUpdate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer; used to derive independent streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t base, Tags... tags) {
  std::uint64_t s = mix_seed(base);
  ((s = mix_seed(s ^ static_cast<std::uint64_t>(tags))), ...);
  return s;
}

// Stream tags, so call sites never collide by accident.
enum class Stream : std::uint64_t {
  Init = 1,
  Design = 2,
  Inference = 3,
  Resample = 4,
  Respond = 5,
  Evaluate = 6,
  Participant = 7,
  Marginal = 8,
};

inline std::uint64_t derive_seed(std::uint64_t base, Stream tag, std::uint64_t index = 0) {
  return derive_seed(base, static_cast<std::uint64_t>(tag), index);
}

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_cdf(double x, double mean, double sd) {
  return normal_cdf((x - mean) / sd);
}

/// log Phi(z), accurate in the far lower tail.
inline double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * M_PI) + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

inline double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double sample_beta(double a, double b, Rng& rng) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

}  // namespace bosmos
