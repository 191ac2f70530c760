#include "bosmos/lfi.hpp"

#include "bosmos/gp/acquisition.hpp"

#include <algorithm>

namespace bosmos {

double log_parameter_likelihood(const LikelihoodApprox& approx, const Vector& theta) {
  const auto p = approx.predict(theta);
  const double sd = std::sqrt(p.variance + approx.surrogate.noise_variance());
  if (!(sd > 0.0)) return p.mean <= approx.epsilon ? 0.0 : -std::numeric_limits<double>::infinity();
  return log_normal_cdf((approx.epsilon - p.mean) / sd);
}

double evaluate_parameter_likelihood(const LikelihoodApprox& approx, const Vector& theta) {
  return std::exp(log_parameter_likelihood(approx, theta));
}

LikelihoodApprox build_surrogate(const ModelSpec& model, const ParticleSet& belief, int k,
                                 const ResponseVector& observed, const DesignVector& design,
                                 const Discrepancy& discrepancy, const SimulationBudget& budget,
                                 std::uint64_t rng_seed, int trial_index) {
  if (budget.total < 2) throw ConfigError("inference budget must be at least 2 simulations");
  Rng rng(rng_seed);
  const ModelBox& box = belief.model(k);
  const int dim = box.dim();

  Matrix inputs(dim, budget.total);
  Vector targets(budget.total);
  int n = 0;
  auto simulate_at = [&](const Vector& theta) {
    ResponseVector x;
    try {
      x = model.simulate(theta, design, rng);
    } catch (const std::exception& e) {
      throw SimulatorError("model " + model.id.name + " failed at theta of dim " + std::to_string(theta.size()) +
                           ": " + e.what());
    }
    inputs.col(n) = box.to_unit(theta);
    targets[n] = discrepancy(x, observed);
    ++n;
  };

  const int initial = std::clamp(budget.initial, 2, budget.total);
  for (const auto& theta : belief.sample_theta(k, initial, rng)) simulate_at(theta);

  const auto kernel = gp::Kernel<double>::isotropic(gp::KernelFamily::RBF, dim, budget.lengthscale);
  gp::AcquisitionSpec spec;
  spec.kind = gp::AcquisitionKind::LCB;
  spec.exploration_weight = budget.exploration_weight;
  int round = 0;
  while (n < budget.total) {
    const auto fit = gp::fit_standardized(inputs.leftCols(n), targets.head(n), kernel);
    spec.batch_size = std::min(budget.batch_size, budget.total - n);
    for (const auto& u : gp::propose_batch(fit.gp, spec, derive_seed(rng_seed, Stream::Inference, ++round)))
      simulate_at(box.from_unit(u));
  }

  LikelihoodApprox approx{model.id, box, gp::fit_standardized(inputs, targets, kernel), 0.0, n, trial_index};
  approx.epsilon = approx.surrogate.predict_many(inputs).first.minCoeff();
  return approx;
}

MarginalLikelihoodReport kernel_report(const Vector& omega) {
  MarginalLikelihoodReport r;
  r.omega = omega;
  r.kappa = Vector::Zero(omega.size());
  r.evidence = Vector::Zero(omega.size());
  double eta = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < omega.size(); ++k)
    if (!std::isnan(omega[k])) eta = std::min(eta, omega[k]);
  if (!std::isfinite(eta)) throw DegenerateUpdate("no live model left");
  // A perfect match gives omega = 0; keep the bandwidth positive.
  r.eta = std::max(eta, 1e-12);
  for (Eigen::Index k = 0; k < omega.size(); ++k)
    if (!std::isnan(omega[k])) r.kappa[k] = gaussian_kernel(omega[k], r.eta);
  r.evidence = r.kappa;
  return r;
}

MarginalLikelihoodReport marginal_likelihood(const std::vector<LikelihoodApprox>& approxes, const ParticleSet& belief,
                                             int n_draws, std::uint64_t rng_seed, MarginalRule rule) {
  if (n_draws < 1) throw ConfigError("marginal likelihood needs at least one draw");
  const int n_models = belief.num_models();
  Vector omega = Vector::Constant(n_models, std::numeric_limits<double>::quiet_NaN());
  std::vector<Vector> means(n_models);
  std::vector<Vector> vars(n_models);
  for (const auto& a : approxes) {
    const int k = a.model.index;
    if (!belief.alive(k)) continue;
    Rng rng(derive_seed(rng_seed, Stream::Marginal, static_cast<std::uint64_t>(k)));
    const auto thetas = belief.sample_theta(k, n_draws, rng);
    Matrix u(a.box.dim(), n_draws);
    for (int i = 0; i < n_draws; ++i) u.col(i) = a.box.to_unit(thetas[i]);
    auto [mean, var] = a.surrogate.predict_many(u);
    // Discrepancies are nonnegative; the surrogate mean can dip below zero between data.
    means[k] = mean.array().max(0.0);
    vars[k] = var.array() + a.surrogate.noise_variance();
    omega[k] = means[k].mean();
  }
  auto report = kernel_report(omega);
  if (rule == MarginalRule::ExpectedKernel) {
    for (int k = 0; k < n_models; ++k) {
      if (std::isnan(omega[k])) continue;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < means[k].size(); ++i)
        acc += expected_gaussian_kernel(means[k][i], vars[k][i], report.eta);
      report.evidence[k] = acc / static_cast<double>(means[k].size());
    }
  }
  return report;
}

ParticleSet posterior_update(const ParticleSet& belief, const std::vector<LikelihoodApprox>& approxes,
                             const MarginalLikelihoodReport& report) {
  std::vector<const LikelihoodApprox*> by_model(belief.num_models(), nullptr);
  for (const auto& a : approxes) by_model[a.model.index] = &a;

  std::vector<Particle> next = belief.particles();
  Vector lw(belief.size());
  for (int i = 0; i < belief.size(); ++i) {
    const auto& p = next[i];
    const auto* a = by_model[p.model];
    const double evidence = report.evidence.size() > p.model ? report.evidence[p.model] : 0.0;
    if (p.weight <= 0.0 || a == nullptr || !(evidence > 0.0)) {
      lw[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    lw[i] = std::log(p.weight) + std::log(evidence) + log_parameter_likelihood(*a, p.theta);
  }
  const double top = lw.maxCoeff();
  if (!std::isfinite(top)) throw DegenerateUpdate("every particle received zero likelihood");
  for (int i = 0; i < belief.size(); ++i) next[i].weight = std::exp(lw[i] - top);
  return ParticleSet(belief.models(), std::move(next));
}

nlohmann::json diagnostics_json(int trial, const std::vector<LikelihoodApprox>& approxes,
                                const MarginalLikelihoodReport& report) {
  nlohmann::json per_model = nlohmann::json::object();
  for (const auto& a : approxes) {
    const int k = a.model.index;
    per_model[a.model.name] = {{"omega", report.omega[k]},
                               {"kappa", report.kappa[k]},
                               {"evidence", report.evidence[k]},
                               {"epsilon", a.epsilon},
                               {"n_sims", a.n_sims}};
  }
  return {{"trial", trial}, {"per_model", per_model}, {"eta", report.eta}};
}

}  // namespace bosmos
