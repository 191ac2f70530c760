#include "doctest.h"
#include "helpers.hpp"

#include "bosmos/tasks.hpp"

#include <algorithm>
#include <set>

using namespace bosmos;
using namespace testing;

TEST_SUITE("belief") {

TEST_CASE("init_from_priors splits particles binomially across two models") {
  const std::vector<ModelSpec> models = {bernoulli_model("A", 0), bernoulli_model("B", 1)};
  const double bound = 4.0 * std::sqrt(5000 * 0.25);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto belief = init_from_priors(models, 5000, seed);
    const auto counts = belief.particle_counts();
    CHECK(std::abs(counts[0] - 2500) <= bound);
    CHECK(counts[0] + counts[1] == 5000);
  }
}

TEST_CASE("a single model owns every particle") {
  const std::vector<ModelSpec> models = {bernoulli_model("only", 0)};
  const auto belief = init_from_priors(models, 500, 3);
  for (const auto& p : belief.particles()) CHECK(p.model == 0);
  CHECK(belief.model(0).id.name == "only");
}

TEST_CASE("memory recall-scale prior has the Beta(2,1) mean") {
  const Task& task = find_task("memory");
  const auto belief = init_from_priors(std::span(task.models).first(1), 100000, 11);
  double sum = 0.0;
  for (const auto& p : belief.particles()) sum += p.theta[0];
  CHECK(std::abs(sum / belief.size() - 2.0 / 3.0) < 0.01);
}

TEST_CASE("reweight normalizes") {
  const ParticleSet two({unit_box("m", 0, 1)}, {{0, vec({0.2}), 0.5}, {0, vec({0.7}), 0.5}});
  SUBCASE("constant likelihood leaves weights alone") {
    const auto out = reweight(two, [](const Particle&) { return 3.0; });
    CHECK(out[0].weight == doctest::Approx(0.5));
    CHECK(out[1].weight == doctest::Approx(0.5));
  }
  SUBCASE("likelihoods 2 and 1") {
    const auto out = reweight(two, [](const Particle& p) { return p.theta[0] < 0.5 ? 2.0 : 1.0; });
    CHECK(out[0].weight == doctest::Approx(2.0 / 3.0));
    CHECK(out[1].weight == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("all-zero likelihood is a degenerate update") {
    CHECK_THROWS_AS(reweight(two, [](const Particle&) { return 0.0; }), DegenerateUpdate);
    CHECK_THROWS_AS(reweight_log(two, [](const Particle&) { return -INFINITY; }), DegenerateUpdate);
  }
}

// Oracle: Beta(a + s, b + f) posterior mean after s successes and f failures.
TEST_CASE("single reweight matches the conjugate Beta-Bernoulli posterior mean") {
  const std::vector<ModelSpec> models = {bernoulli_model("bern", 0, 2.0, 3.0)};
  const int s = 7, f = 3;
  const double truth = (2.0 + s) / (2.0 + 3.0 + s + f);
  const auto prior = init_from_priors(models, 10000, 21);
  const auto post = reweight_log(prior, [&](const Particle& p) {
    return s * std::log(p.theta[0]) + f * std::log1p(-p.theta[0]);
  });
  double mean = 0.0;
  for (const auto& p : post.particles()) mean += p.weight * p.theta[0];
  CHECK(std::abs(mean - truth) < 0.02);
}

// Repeated resampling inflates the Monte Carlo error beyond sd / sqrt(N), so the standard error
// is estimated from independent replicates run on the same data.
TEST_CASE("sequential exact updates with resampling track the conjugate posterior within 3 MC standard errors") {
  const double a = 2.0, b = 3.0, p_true = 0.7;
  const int n = 10000, reps = 12;
  const std::vector<ModelSpec> models = {bernoulli_model("bern", 0, a, b)};
  Rng data(7919);
  std::vector<double> xs;
  for (int t = 0; t < 10; ++t) xs.push_back(uniform01(data) < p_true ? 1.0 : 0.0);
  int succ = 0;
  for (double x : xs) succ += x > 0.5;
  const double pa = a + succ, pb = b + (10 - succ);
  const double truth = pa / (pa + pb);
  const double sd = std::sqrt(pa * pb / ((pa + pb) * (pa + pb) * (pa + pb + 1.0)));

  std::vector<double> means;
  for (std::uint64_t seed = 1; seed <= reps; ++seed) {
    auto belief = init_from_priors(models, n, seed);
    for (int t = 0; t < 10; ++t) {
      belief = reweight_log(belief, [&](const Particle& p) {
        return (*models[0].log_likelihood)(Vector::Constant(1, xs[t]), p.theta, Vector());
      });
      belief = resample_with_jitter(belief, 0.01, derive_seed(seed, Stream::Resample, t));
    }
    double mean = 0.0;
    for (const auto& p : belief.particles()) mean += p.weight * p.theta[0];
    means.push_back(mean);
  }
  double grand = 0.0, var = 0.0;
  for (double m : means) grand += m / reps;
  for (double m : means) var += (m - grand) * (m - grand) / (reps - 1);
  const double se = std::sqrt(var);
  CHECK(std::abs(grand - truth) <= 3.0 * se / std::sqrt(reps));
  // Resampling noise stays within a small multiple of the i.i.d. error.
  CHECK(se <= 3.0 * sd / std::sqrt(n));
  for (double m : means) CHECK(std::abs(m - truth) <= 3.0 * se + 1e-12);
}

TEST_CASE("resampling without jitter stays on the input support") {
  Rng gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Particle> ps;
    std::set<double> support;
    const int n = 5 + static_cast<int>(uniform01(gen) * 40);
    for (int i = 0; i < n; ++i) {
      const double x = uniform01(gen);
      support.insert(x);
      ps.push_back({0, vec({x}), uniform01(gen) + 1e-3});
    }
    const ParticleSet belief({unit_box("m", 0, 1)}, ps);
    const auto out = resample_with_jitter(belief, 0.0, trial);
    for (const auto& p : out.particles()) CHECK(support.count(p.theta[0]) == 1);
    CHECK(out.weights().sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.effective_sample_size() == doctest::Approx(n));
  }
}

TEST_CASE("resampling a point mass copies its model everywhere") {
  const ParticleSet belief({unit_box("a", 0, 1), unit_box("b", 1, 2)},
                           {{0, vec({0.3}), 0.0}, {1, vec({0.1, 0.9}), 1.0}, {0, vec({0.5}), 0.0}});
  const auto out = resample_with_jitter(belief, 0.01, 9);
  for (const auto& p : out.particles()) CHECK(p.model == 1);
}

TEST_CASE("models below 1/N mass die at resampling and jitter stays in the box") {
  std::vector<Particle> ps;
  for (int i = 0; i < 1000; ++i) ps.push_back({i == 0 ? 1 : 0, vec({0.999}), i == 0 ? 1e-5 : 1.0});
  const ParticleSet belief({unit_box("live", 0, 1), unit_box("dying", 1, 1)}, ps);
  const auto out = resample_with_jitter(belief, 0.5, 4);
  CHECK(out.particle_counts()[1] == 0);
  CHECK_FALSE(out.alive(1));
  for (const auto& p : out.particles()) {
    CHECK(p.theta[0] >= 0.0);
    CHECK(p.theta[0] <= 1.0);
  }
}

TEST_CASE("weights sum to one after reweight and resample cycles") {
  Rng gen(77);
  const std::vector<ModelSpec> models = {bernoulli_model("a", 0), bernoulli_model("b", 1)};
  auto belief = init_from_priors(models, 2000, 1);
  for (int t = 0; t < 20; ++t) {
    const double shift = uniform01(gen);
    belief = reweight(belief, [&](const Particle& p) { return std::exp(-std::abs(p.theta[0] - shift)) * (p.model + 1); });
    CHECK(belief.weights().sum() == doctest::Approx(1.0).epsilon(1e-9));
    belief = resample_with_jitter(belief, 0.01, t);
    CHECK(belief.weights().sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("model marginals are invariant under particle permutation") {
  Rng gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Particle> ps;
    for (int i = 0; i < 40; ++i) ps.push_back({uniform01(gen) < 0.4 ? 1 : 0, vec({uniform01(gen)}), uniform01(gen)});
    const ParticleSet a({unit_box("x", 0, 1), unit_box("y", 1, 1)}, ps);
    std::shuffle(ps.begin(), ps.end(), gen);
    const ParticleSet b({unit_box("x", 0, 1), unit_box("y", 1, 1)}, ps);
    CHECK((a.model_marginals() - b.model_marginals()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("map_estimate") {
  SUBCASE("a point mass is returned as is") {
    const ParticleSet belief({unit_box("m", 0, 2)},
                             {{0, vec({0.1, 0.2}), 0.0}, {0, vec({0.8, 0.4}), 1.0}, {0, vec({0.5, 0.5}), 0.0}});
    const auto e = map_estimate(belief);
    CHECK(e.theta[0] == 0.8);
    CHECK(e.theta[1] == 0.4);
  }
  SUBCASE("model with the larger mass wins regardless of spread") {
    std::vector<Particle> ps;
    Rng gen(2);
    for (int i = 0; i < 70; ++i) ps.push_back({0, vec({uniform01(gen)}), 1.0});
    for (int i = 0; i < 30; ++i) ps.push_back({1, vec({0.5}), 1.0});
    const ParticleSet belief({unit_box("wide", 0, 1), unit_box("tight", 1, 1)}, ps);
    CHECK(map_estimate(belief).model.name == "wide");
  }
  SUBCASE("bimodal cloud: the heavier cluster holds the mode") {
    // Oracle: brute-force KDE density at every particle with the same Silverman bandwidth.
    Rng gen(31);
    std::vector<Particle> ps;
    for (int i = 0; i < 600; ++i) ps.push_back({0, vec({std::clamp(0.25 + 0.05 * standard_normal(gen), 0.0, 1.0)}), 1.0});
    for (int i = 0; i < 400; ++i) ps.push_back({0, vec({std::clamp(0.75 + 0.05 * standard_normal(gen), 0.0, 1.0)}), 1.0});
    const ParticleSet belief({unit_box("m", 0, 1)}, ps);
    const double x = map_estimate(belief).theta[0];
    CHECK(std::abs(x - 0.25) < 0.1);

    double mean = 0.0, var = 0.0;
    for (const auto& p : ps) mean += p.theta[0] / ps.size();
    for (const auto& p : ps) var += (p.theta[0] - mean) * (p.theta[0] - mean) / ps.size();
    const double h = std::sqrt(var) * std::pow(4.0 / (3.0 * ps.size()), 0.2);
    double best = -1.0, arg = 0.0;
    for (const auto& c : ps) {
      double dens = 0.0;
      for (const auto& p : ps) dens += std::exp(-0.5 * std::pow((p.theta[0] - c.theta[0]) / h, 2));
      if (dens > best) {
        best = dens;
        arg = c.theta[0];
      }
    }
    CHECK(x == doctest::Approx(arg));
  }
  SUBCASE("uniform weight rescaling does not change the estimate") {
    Rng gen(4);
    std::vector<Particle> ps, scaled;
    for (int i = 0; i < 200; ++i) {
      ps.push_back({i % 2, vec({uniform01(gen), uniform01(gen)}), uniform01(gen)});
      scaled.push_back(ps.back());
      scaled.back().weight *= 123.0;
    }
    const ParticleSet a({unit_box("x", 0, 2), unit_box("y", 1, 2)}, ps);
    const ParticleSet b({unit_box("x", 0, 2), unit_box("y", 1, 2)}, scaled);
    const auto ea = map_estimate(a), eb = map_estimate(b);
    CHECK(ea.model.index == eb.model.index);
    CHECK((ea.theta - eb.theta).norm() < 1e-12);
  }
}

TEST_CASE("bic_estimate penalizes dimension") {
  SUBCASE("equal masses: the one-parameter model wins at t=20") {
    const ParticleSet belief({unit_box("small", 0, 1), unit_box("big", 1, 2)},
                             {{0, vec({0.5}), 1.0}, {1, vec({0.5, 0.5}), 1.0}});
    CHECK(bic_estimate(belief, history_of(20)).model.name == "small");
  }
  SUBCASE("a model holding all mass wins at any t") {
    const ParticleSet belief({unit_box("small", 0, 1), unit_box("big", 1, 3)},
                             {{0, vec({0.5}), 0.0}, {1, vec({0.5, 0.5, 0.5}), 1.0}});
    for (int t : {1, 5, 100}) CHECK(bic_estimate(belief, history_of(t)).model.name == "big");
  }
  CHECK_THROWS_AS(bic_estimate(ParticleSet({unit_box("m", 0, 1)}, {{0, vec({0.5}), 1.0}}), {}), ConfigError);
}

TEST_CASE("particle sets round-trip through JSON") {
  const std::vector<ModelSpec> models = {bernoulli_model("a", 0), bernoulli_model("b", 1)};
  const auto belief = init_from_priors(models, 50, 6);
  const auto back = particle_set_from_json(to_json(belief, 6, 0));
  REQUIRE(back.size() == belief.size());
  for (int i = 0; i < belief.size(); ++i) {
    CHECK(back[i].model == belief[i].model);
    CHECK(back[i].theta == belief[i].theta);
  }
}

}  // TEST_SUITE
