#include "bosmos/belief.hpp"

#include <algorithm>
#include <numeric>

namespace bosmos {

Vector ModelBox::to_unit(const Vector& theta) const {
  return ((theta - lower).array() / width().array().max(1e-300)).matrix();
}

Vector ModelBox::from_unit(const Vector& u) const { return lower + (u.array() * width().array()).matrix(); }

// ---------------------------------------------------------------------------
// ParticleSet
// ---------------------------------------------------------------------------

ParticleSet::ParticleSet(std::vector<ModelBox> models, std::vector<Particle> particles)
    : models_(std::move(models)), particles_(std::move(particles)) {
  if (models_.empty()) throw ConfigError("particle set needs at least one model");
  if (particles_.empty()) throw ConfigError("particle set needs at least one particle");
  double total = 0.0;
  for (const auto& p : particles_) {
    if (p.model < 0 || p.model >= num_models()) throw ConfigError("particle references unknown model");
    if (p.theta.size() != models_[p.model].dim()) throw ConfigError("particle theta has wrong dimension");
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) throw NumericalError("particle weight must be finite and >= 0");
    total += p.weight;
  }
  if (!(total > 0.0)) throw DegenerateUpdate("particle weights sum to zero");
  for (auto& p : particles_) p.weight /= total;
}

Vector ParticleSet::weights() const {
  Vector w(size());
  for (int i = 0; i < size(); ++i) w[i] = particles_[i].weight;
  return w;
}

Vector ParticleSet::model_marginals() const {
  Vector m = Vector::Zero(num_models());
  for (const auto& p : particles_) m[p.model] += p.weight;
  return m;
}

std::vector<int> ParticleSet::particle_counts() const {
  std::vector<int> counts(num_models(), 0);
  for (const auto& p : particles_) ++counts[p.model];
  return counts;
}

bool ParticleSet::alive(int k) const {
  return std::any_of(particles_.begin(), particles_.end(),
                     [k](const Particle& p) { return p.model == k && p.weight > 0.0; });
}

std::vector<int> ParticleSet::live_models() const {
  std::vector<int> out;
  for (int k = 0; k < num_models(); ++k)
    if (alive(k)) out.push_back(k);
  return out;
}

double ParticleSet::effective_sample_size() const { return 1.0 / weights().squaredNorm(); }

ParticleSet ParticleSet::conditional(int k) const {
  std::vector<Particle> sub;
  for (const auto& p : particles_)
    if (p.model == k && p.weight > 0.0) sub.push_back(p);
  if (sub.empty()) throw ConfigError("model '" + models_[k].id.name + "' has no particles");
  return ParticleSet(models_, std::move(sub));
}

namespace {

// Inverse-CDF draws with a single sorted uniform sweep.
std::vector<int> draw_indices(const std::vector<double>& cumulative, int n, Rng& rng) {
  std::vector<double> u(n);
  for (auto& x : u) x = uniform01(rng) * cumulative.back();
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u[i]);
    out[i] = static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), cumulative.size() - 1));
  }
  return out;
}

}  // namespace

std::vector<Vector> ParticleSet::sample_theta(int k, int n, Rng& rng) const {
  std::vector<int> idx;
  std::vector<double> cum;
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) {
    if (particles_[i].model != k || particles_[i].weight <= 0.0) continue;
    acc += particles_[i].weight;
    idx.push_back(i);
    cum.push_back(acc);
  }
  if (idx.empty()) throw ConfigError("model '" + models_[k].id.name + "' has no particles");
  std::vector<Vector> out;
  out.reserve(n);
  for (int j : draw_indices(cum, n, rng)) out.push_back(particles_[idx[j]].theta);
  return out;
}

std::vector<Particle> ParticleSet::sample(int n, Rng& rng) const {
  std::vector<double> cum(size());
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) cum[i] = (acc += particles_[i].weight);
  std::vector<Particle> out;
  out.reserve(n);
  for (int j : draw_indices(cum, n, rng)) {
    Particle p = particles_[j];
    p.weight = 1.0 / n;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

ParticleSet init_from_priors(std::span<const ModelSpec> models, int n_particles, std::uint64_t rng_seed,
                             std::optional<Vector> model_prior) {
  if (models.empty()) throw ConfigError("model list is empty");
  if (n_particles < 1) throw ConfigError("n_particles must be >= 1");
  const int k = static_cast<int>(models.size());
  Vector prior = model_prior.value_or(Vector::Constant(k, 1.0 / k));
  if (prior.size() != k || (prior.array() < 0).any() || !(prior.sum() > 0))
    throw ConfigError("model prior must be a nonnegative vector with one entry per model");

  std::vector<ModelBox> boxes;
  for (int i = 0; i < k; ++i) boxes.push_back({{models[i].id.name, i}, models[i].lower(), models[i].upper()});

  Rng rng(rng_seed);
  std::discrete_distribution<int> pick(prior.data(), prior.data() + k);
  std::vector<Particle> particles(n_particles);
  for (auto& p : particles) {
    p.model = k == 1 ? 0 : pick(rng);
    p.theta = models[p.model].sample_prior(rng);
    p.weight = 1.0 / n_particles;
  }
  return ParticleSet(std::move(boxes), std::move(particles));
}

ParticleSet reweight(const ParticleSet& belief, const std::function<double(const Particle&)>& likelihood) {
  std::vector<Particle> next = belief.particles();
  double total = 0.0;
  for (auto& p : next) {
    const double l = likelihood(p);
    if (!(l >= 0.0)) throw NumericalError("likelihood must be nonnegative");
    p.weight *= l;
    total += p.weight;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw DegenerateUpdate("all particle likelihoods are zero");
  return ParticleSet(belief.models(), std::move(next));
}

ParticleSet reweight_log(const ParticleSet& belief, const std::function<double(const Particle&)>& log_likelihood) {
  std::vector<Particle> next = belief.particles();
  Vector lw(belief.size());
  for (int i = 0; i < belief.size(); ++i) {
    const double w = next[i].weight;
    lw[i] = w > 0.0 ? std::log(w) + log_likelihood(next[i]) : -std::numeric_limits<double>::infinity();
    if (std::isnan(lw[i])) throw NumericalError("log-likelihood is NaN");
  }
  const double top = lw.maxCoeff();
  if (!std::isfinite(top)) throw DegenerateUpdate("all particle likelihoods are zero");
  for (int i = 0; i < belief.size(); ++i) next[i].weight = std::exp(lw[i] - top);
  return ParticleSet(belief.models(), std::move(next));
}

ParticleSet resample_with_jitter(const ParticleSet& belief, double jitter_scale, std::uint64_t rng_seed) {
  const int n = belief.size();
  Vector mass = belief.model_marginals();

  // Models under 1/N die here; keep the heaviest alive if that would empty the set.
  std::vector<bool> keep(belief.num_models());
  for (int k = 0; k < belief.num_models(); ++k) keep[k] = mass[k] >= 1.0 / n;
  if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; })) {
    Eigen::Index best;
    mass.maxCoeff(&best);
    keep[best] = true;
  }

  std::vector<double> cum(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& p = belief[i];
    cum[i] = (acc += keep[p.model] ? p.weight : 0.0);
  }

  Rng rng(rng_seed);
  const double step = acc / n;
  double u = uniform01(rng) * step;
  std::vector<Particle> out;
  out.reserve(n);
  int j = 0;
  for (int i = 0; i < n; ++i, u += step) {
    while (j < n - 1 && cum[j] <= u) ++j;
    Particle p = belief[j];
    p.weight = 1.0 / n;
    if (jitter_scale > 0.0) {
      const auto& box = belief.model(p.model);
      for (int d = 0; d < p.theta.size(); ++d) {
        const double sd = jitter_scale * (box.upper[d] - box.lower[d]);
        p.theta[d] = std::clamp(p.theta[d] + sd * standard_normal(rng), box.lower[d], box.upper[d]);
      }
    }
    out.push_back(std::move(p));
  }
  return ParticleSet(belief.models(), std::move(out));
}

namespace {

constexpr int kMaxModeCandidates = 1000;
constexpr int kTopWeightCandidates = 100;

int argmax_mass(const Vector& mass) {
  int best = 0;
  for (int k = 1; k < mass.size(); ++k)
    if (mass[k] > mass[best]) best = k;
  return best;
}

// Weighted Gaussian-KDE mode over the particles of model k, searched at the particles.
Vector kde_mode(const ParticleSet& belief, int k, double bandwidth) {
  const auto& box = belief.model(k);
  std::vector<int> idx;
  for (int i = 0; i < belief.size(); ++i)
    if (belief[i].model == k && belief[i].weight > 0.0) idx.push_back(i);
  const int n = static_cast<int>(idx.size());
  const int d = box.dim();
  if (n == 0) return (box.lower + box.upper) / 2.0;
  if (d == 0 || n == 1) return belief[idx[0]].theta;

  Matrix u(d, n);
  Vector w(n);
  for (int j = 0; j < n; ++j) {
    u.col(j) = box.to_unit(belief[idx[j]].theta);
    w[j] = belief[idx[j]].weight;
  }
  w /= w.sum();

  Vector h(d);
  if (bandwidth > 0.0) {
    h.setConstant(bandwidth);
  } else {
    const Vector mean = u * w;
    const Vector var = ((u.colwise() - mean).array().square().matrix() * w);
    const double n_eff = 1.0 / w.squaredNorm();
    const double factor = std::pow(4.0 / ((d + 2.0) * n_eff), 1.0 / (d + 4.0));
    h = (var.array().sqrt() * factor).max(1e-6).matrix();
  }
  const Matrix scaled = u.array().colwise() / h.array();

  std::vector<int> cand;
  if (n <= kMaxModeCandidates) {
    cand.resize(n);
    std::iota(cand.begin(), cand.end(), 0);
  } else {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w[a] > w[b]; });
    cand.assign(order.begin(), order.begin() + kTopWeightCandidates);
    const int stride = (n + kMaxModeCandidates - kTopWeightCandidates - 1) / (kMaxModeCandidates - kTopWeightCandidates);
    for (int j = 0; j < n; j += stride) cand.push_back(j);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  }

  int best = cand.front();
  double best_density = -1.0;
  for (int c : cand) {
    const double density = w.dot((-0.5 * (scaled.colwise() - scaled.col(c)).colwise().squaredNorm()).array().exp().matrix().transpose());
    if (density > best_density) {
      best_density = density;
      best = c;
    }
  }
  return belief[idx[best]].theta;
}

}  // namespace

Estimate map_estimate(const ParticleSet& belief, double bandwidth) {
  const int k = argmax_mass(belief.model_marginals());
  return {belief.model(k).id, kde_mode(belief, k, bandwidth)};
}

Estimate bic_estimate(const ParticleSet& belief, std::span<const TrialRecord> history) {
  if (history.empty()) throw ConfigError("BIC rule needs at least one trial");
  const double log_t = std::log(static_cast<double>(history.size()));
  const Vector mass = belief.model_marginals();
  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int k = 0; k < belief.num_models(); ++k) {
    if (!(mass[k] > 0.0)) continue;
    const double score = -2.0 * std::log(mass[k]) + belief.model(k).dim() * log_t;
    if (score < best_score) {
      best_score = score;
      best = k;
    }
  }
  if (best < 0) best = argmax_mass(mass);
  return {belief.model(best).id, kde_mode(belief, best, 0.0)};
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const nlohmann::json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

}  // namespace

nlohmann::json to_json(const ParticleSet& belief, std::uint64_t seed, int trial_index) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : belief.models())
    models.push_back({{"name", m.id.name}, {"index", m.id.index}, {"lower", vec_json(m.lower)}, {"upper", vec_json(m.upper)}});
  nlohmann::json particles = nlohmann::json::array();
  for (const auto& p : belief.particles())
    particles.push_back({{"model", belief.model(p.model).id.name}, {"theta", vec_json(p.theta)}, {"weight", p.weight}});
  return {{"v", 1}, {"models", models}, {"particles", particles}, {"seed", seed}, {"trial_index", trial_index}};
}

ParticleSet particle_set_from_json(const nlohmann::json& doc) {
  std::vector<ModelBox> boxes;
  for (const auto& m : doc.at("models"))
    boxes.push_back({{m.at("name").get<std::string>(), m.at("index").get<int>()}, json_vec(m.at("lower")), json_vec(m.at("upper"))});
  std::vector<Particle> particles;
  for (const auto& p : doc.at("particles")) {
    const auto name = p.at("model").get<std::string>();
    auto it = std::find_if(boxes.begin(), boxes.end(), [&](const ModelBox& b) { return b.id.name == name; });
    if (it == boxes.end()) throw ConfigError("particle references unknown model '" + name + "'");
    particles.push_back({static_cast<int>(it - boxes.begin()), json_vec(p.at("theta")), p.at("weight").get<double>()});
  }
  return ParticleSet(std::move(boxes), std::move(particles));
}

}  // namespace bosmos
