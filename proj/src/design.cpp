#include "bosmos/design.hpp"

#include "bosmos/gp/acquisition.hpp"
#include "bosmos/gp/standardized.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <mutex>

namespace bosmos {

namespace {

struct Quadrature {
  std::vector<Vector> nodes;  // already multiplied by sqrt(2)
  std::vector<double> weights;  // sum to one
};

// Gauss-Hermite rule via the Golub-Welsch eigenproblem, as an expectation under N(0, 1).
std::pair<Vector, Vector> gauss_hermite_1d(int q) {
  Matrix jacobi = Matrix::Zero(q, q);
  for (int i = 1; i < q; ++i) jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  const Vector nodes = eig.eigenvalues() * std::sqrt(2.0);
  const Vector weights = eig.eigenvectors().row(0).transpose().array().square();
  return {nodes, weights / weights.sum()};
}

const Quadrature& quadrature(int dim) {
  static std::mutex mu;
  static std::map<int, Quadrature> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(dim);
  if (it != cache.end()) return it->second;

  const int q = dim <= 2 ? 8 : dim == 3 ? 5 : 3;
  const auto [x, w] = gauss_hermite_1d(q);
  Quadrature rule;
  std::vector<int> idx(dim, 0);
  for (;;) {
    Vector node(dim);
    double weight = 1.0;
    for (int d = 0; d < dim; ++d) {
      node[d] = x[idx[d]];
      weight *= w[idx[d]];
    }
    rule.nodes.push_back(std::move(node));
    rule.weights.push_back(weight);
    int d = 0;
    while (d < dim && ++idx[d] == q) idx[d++] = 0;
    if (d == dim) break;
  }
  return cache.emplace(dim, std::move(rule)).first->second;
}

// Distinct sample points with multiplicities; discrete responses repeat a lot.
std::pair<std::vector<Vector>, Vector> collapse(const std::vector<Vector>& samples) {
  std::vector<Vector> sorted = samples;
  std::sort(sorted.begin(), sorted.end(), [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  std::vector<Vector> centres;
  std::vector<double> counts;
  for (const auto& s : sorted) {
    if (!centres.empty() && centres.back() == s) {
      counts.back() += 1.0;
    } else {
      centres.push_back(s);
      counts.push_back(1.0);
    }
  }
  return {centres, Eigen::Map<Vector>(counts.data(), static_cast<Eigen::Index>(counts.size()))};
}

constexpr int kMaxOuterComponents = 512;

gp::AcquisitionSpec design_acquisition() {
  gp::AcquisitionSpec spec;
  spec.kind = gp::AcquisitionKind::NoisyEI;
  spec.batch_size = 1;
  return spec;
}

constexpr double kDesignLengthscale = 0.2;

}  // namespace

double silverman_bandwidth(const std::vector<Vector>& samples, double floor) {
  const int n = static_cast<int>(samples.size());
  if (n < 2) return floor;
  const int dim = static_cast<int>(samples.front().size());
  Vector mean = Vector::Zero(dim);
  for (const auto& s : samples) mean += s;
  mean /= n;
  Vector var = Vector::Zero(dim);
  for (const auto& s : samples) var += (s - mean).array().square().matrix();
  var /= (n - 1);
  const double sd = var.array().sqrt().mean();
  const double h = sd * std::pow(4.0 / ((dim + 2.0) * n), 1.0 / (dim + 4.0));
  return std::max(h, floor);
}

EntropyEstimate kernel_entropy(const std::vector<Vector>& samples, double bandwidth) {
  if (samples.size() < 2) throw std::invalid_argument("kernel entropy needs at least 2 samples");
  const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  const int dim = static_cast<int>(samples.front().size());
  const auto [centres, counts] = collapse(samples);
  const int m = static_cast<int>(centres.size());
  const Vector log_mix = (counts / counts.sum()).array().log();
  const double log_norm = -0.5 * dim * std::log(2.0 * M_PI * h * h);
  const auto& rule = quadrature(dim);

  Matrix c(dim, m);
  for (int i = 0; i < m; ++i) c.col(i) = centres[i];

  // Outer expectation over components; large continuous samples use an even stride.
  const int stride = std::max(1, (m + kMaxOuterComponents - 1) / kMaxOuterComponents);
  double total = 0.0;
  double outer_mass = 0.0;
  Vector lse(m);
  for (int j = 0; j < m; j += stride) {
    double inner = 0.0;
    for (size_t q = 0; q < rule.nodes.size(); ++q) {
      const Vector y = centres[j] + h * rule.nodes[q];
      lse = log_mix - ((c.colwise() - y).colwise().squaredNorm().transpose() / (2.0 * h * h));
      inner += rule.weights[q] * (log_sum_exp(lse) + log_norm);
    }
    total += counts[j] * inner;
    outer_mass += counts[j];
  }
  return {-total / outer_mass, static_cast<int>(samples.size()), h};
}

UtilityValue bosmos_utility(const DesignVector& design, const ParticleSet& belief, const Task& task,
                            const UtilityEvalConfig& cfg, std::uint64_t rng_seed) {
  if (cfg.n_model_draws < 1 || cfg.n_sims_per_draw < 2) throw ConfigError("utility needs >= 1 draw and >= 2 sims");
  Rng rng(rng_seed);
  const auto pairs = belief.sample(cfg.n_model_draws, rng);
  std::vector<std::vector<Vector>> per_pair(pairs.size());
  std::vector<Vector> pooled;
  pooled.reserve(pairs.size() * cfg.n_sims_per_draw);
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& spec = task.models[pairs[i].model];
    for (int r = 0; r < cfg.n_sims_per_draw; ++r) {
      Vector x = task.scaled(spec.simulate(pairs[i].theta, design, rng));
      per_pair[i].push_back(x);
      pooled.push_back(std::move(x));
    }
  }
  const double h =
      cfg.entropy_bandwidth > 0.0 ? cfg.entropy_bandwidth : silverman_bandwidth(pooled, task.entropy_bandwidth_floor);
  double first = 0.0;
  for (const auto& xs : per_pair) first += kernel_entropy(xs, h).value;
  first /= static_cast<double>(per_pair.size());
  const double second = kernel_entropy(pooled, h).value;
  return {first - second, static_cast<long>(pooled.size())};
}

nlohmann::json DesignChoice::trace() const {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& [d, u] : candidates) cands.push_back({{"design", vec(d)}, {"utility", u}});
  return {{"candidates", cands}, {"chosen", vec(design)}};
}

DesignChoice minimize_over_designs(const DesignSpace& space,
                                   const std::function<UtilityValue(const DesignVector&, std::uint64_t)>& objective,
                                   int bo_init, int bo_steps, std::uint64_t rng_seed) {
  if (bo_init < 1) throw ConfigError("design search needs at least one initial evaluation");
  Rng rng(derive_seed(rng_seed, Stream::Design));
  DesignChoice out;
  std::uint64_t call = 0;
  auto evaluate = [&](DesignVector d) {
    const auto u = objective(d, derive_seed(rng_seed, Stream::Design, ++call));
    out.n_sims += u.n_sims;
    out.candidates.emplace_back(std::move(d), u.value);
  };

  for (int i = 0; i < bo_init; ++i) evaluate(space.sample(rng));

  const auto kernel = gp::Kernel<double>::isotropic(gp::KernelFamily::Matern52, space.dim(), kDesignLengthscale);
  for (int s = 0; s < bo_steps; ++s) {
    const int n = static_cast<int>(out.candidates.size());
    Matrix x(space.dim(), n);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      x.col(i) = space.to_unit(out.candidates[i].first);
      y[i] = out.candidates[i].second;
    }
    const auto fit = gp::fit_standardized(x, y, kernel);
    const auto next = gp::propose_batch(fit.gp, design_acquisition(), derive_seed(rng_seed, Stream::Design, 1000 + s));
    evaluate(space.from_unit(next.front()));
  }

  const auto best = std::min_element(out.candidates.begin(), out.candidates.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  out.design = best->first;
  out.utility = best->second;
  return out;
}

DesignChoice select_design_bosmos(const ParticleSet& belief, const Task& task, const UtilityEvalConfig& cfg,
                                  std::uint64_t rng_seed) {
  return minimize_over_designs(
      task.design_space,
      [&](const DesignVector& d, std::uint64_t seed) { return bosmos_utility(d, belief, task, cfg, seed); },
      cfg.bo_init, cfg.bo_steps, rng_seed);
}

AdoSample ado_sample(const ParticleSet& belief, const Task& task, int n_theta, std::uint64_t rng_seed) {
  for (const auto& m : task.models)
    if (!m.log_likelihood || !m.response_support)
      throw UnsupportedModel("ADO needs exact likelihoods over a finite response set; model " + m.id.name +
                             " of task " + task.name + " has none");
  Rng rng(rng_seed);
  AdoSample s;
  s.models = belief.live_models();
  const Vector marg = belief.model_marginals();
  s.model_prob.resize(static_cast<Eigen::Index>(s.models.size()));
  for (size_t i = 0; i < s.models.size(); ++i) {
    s.model_prob[i] = marg[s.models[i]];
    s.thetas.push_back(belief.sample_theta(s.models[i], n_theta, rng));
  }
  s.model_prob /= s.model_prob.sum();
  return s;
}

double ado_utility(const DesignVector& design, const Task& task, const AdoSample& sample) {
  const int k = static_cast<int>(sample.models.size());
  if (k == 0) return 0.0;
  const auto& first = task.models[sample.models.front()];
  if (!first.response_support) throw UnsupportedModel("ADO needs a finite response set");
  const auto& support = *first.response_support;

  Matrix p(k, static_cast<Eigen::Index>(support.size()));
  for (int i = 0; i < k; ++i) {
    const auto& spec = task.models[sample.models[i]];
    if (!spec.log_likelihood) throw UnsupportedModel("model " + spec.id.name + " has no exact likelihood");
    for (size_t y = 0; y < support.size(); ++y) {
      double acc = 0.0;
      for (const auto& theta : sample.thetas[i]) acc += std::exp((*spec.log_likelihood)(support[y], theta, design));
      p(i, static_cast<Eigen::Index>(y)) = acc / static_cast<double>(sample.thetas[i].size());
    }
  }
  const Vector marginal = p.transpose() * sample.model_prob;
  double u = 0.0;
  for (int i = 0; i < k; ++i)
    for (Eigen::Index y = 0; y < p.cols(); ++y)
      if (p(i, y) > 0.0 && marginal[y] > 0.0) u += sample.model_prob[i] * p(i, y) * std::log(p(i, y) / marginal[y]);
  return std::max(u, 0.0);
}

DesignChoice select_design_ado(const ParticleSet& belief, const Task& task, const UtilityEvalConfig& cfg,
                               int n_theta, std::uint64_t rng_seed) {
  const auto sample = ado_sample(belief, task, n_theta, derive_seed(rng_seed, Stream::Inference));
  auto choice = minimize_over_designs(
      task.design_space,
      [&](const DesignVector& d, std::uint64_t) { return UtilityValue{-ado_utility(d, task, sample), 0}; },
      cfg.bo_init, cfg.bo_steps, rng_seed);
  // Report mutual information rather than the minimized negative.
  choice.utility = -choice.utility;
  for (auto& c : choice.candidates) c.second = -c.second;
  return choice;
}

DesignVector select_design_random(const Task& task, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return task.design_space.sample(rng);
}

}  // namespace bosmos
