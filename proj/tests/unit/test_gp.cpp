#include "doctest.h"

#include "bosmos/gp/acquisition.hpp"
#include "bosmos/gp/standardized.hpp"

#include <Eigen/LU>

#include <set>

using namespace bosmos;
using namespace bosmos::gp;

namespace {

double oracle_kernel(KernelFamily f, const Vector& x, const Vector& y, const Vector& ls, double sv) {
  double r2 = 0.0;
  for (int i = 0; i < x.size(); ++i) r2 += std::pow((x[i] - y[i]) / ls[i], 2);
  if (f == KernelFamily::RBF) return sv * std::exp(-0.5 * r2);
  const double s = std::sqrt(5.0 * r2);
  return sv * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

Matrix random_inputs(int dim, int n, Rng& rng) {
  Matrix x(dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) x(i, j) = uniform01(rng);
  return x;
}

GpModel fit_1d(const std::vector<double>& xs, const std::function<double(double)>& f, double ls, double noise,
               KernelFamily fam = KernelFamily::RBF) {
  Matrix x(1, xs.size());
  Vector y(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    x(0, i) = xs[i];
    y[i] = f(xs[i]);
  }
  return GpModel::fit(x, y, Kernel<double>::isotropic(fam, 1, ls), noise);
}

}  // namespace

TEST_SUITE("gp") {

// Oracle: dense LU solve of the textbook posterior equations with an independently coded kernel.
TEST_CASE("posterior matches a dense-solve oracle") {
  Rng rng(12);
  for (auto fam : {KernelFamily::RBF, KernelFamily::Matern52}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int dim = 1 + trial % 3;
      const Matrix x = random_inputs(dim, 5, rng);
      Vector y(5);
      for (int i = 0; i < 5; ++i) y[i] = standard_normal(rng);
      Vector ls(dim);
      for (int i = 0; i < dim; ++i) ls[i] = 0.2 + uniform01(rng);
      const double sv = 0.5 + uniform01(rng), noise = 0.01 + 0.1 * uniform01(rng);
      const GpModel gp = GpModel::fit(x, y, Kernel<double>{fam, ls, sv}, noise);

      Matrix k(5, 5);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) k(i, j) = oracle_kernel(fam, x.col(i), x.col(j), ls, sv) + (i == j ? noise : 0.0);
      const Matrix kinv = k.fullPivLu().inverse();
      for (int q = 0; q < 5; ++q) {
        Vector xq(dim);
        for (int i = 0; i < dim; ++i) xq[i] = uniform01(rng);
        Vector ks(5);
        for (int i = 0; i < 5; ++i) ks[i] = oracle_kernel(fam, x.col(i), xq, ls, sv);
        const double mean = ks.dot(kinv * y);
        const double var = sv - ks.dot(kinv * ks);
        const auto p = gp.predict(xq);
        CHECK(p.mean == doctest::Approx(mean).epsilon(1e-8).scale(1.0));
        CHECK(p.variance == doctest::Approx(var).epsilon(1e-8).scale(1.0));
      }
      // Log marginal likelihood against the determinant form.
      const double lml = -0.5 * (y.dot(kinv * y) + std::log(k.determinant()) + 5 * std::log(2 * M_PI));
      CHECK(gp.log_marginal_likelihood() == doctest::Approx(lml).epsilon(1e-8));
    }
  }
}

TEST_CASE("noise-free fit interpolates its training points") {
  const GpModel gp = fit_1d({0.1, 0.4, 0.7, 0.9}, [](double x) { return std::sin(6 * x); }, 0.3, 0.0);
  for (int i = 0; i < gp.size(); ++i) {
    const auto p = gp.predict(gp.inputs().col(i));
    CHECK(p.mean == doctest::Approx(gp.targets()[i]).epsilon(1e-6));
    CHECK(p.variance < 1e-6);
  }
}

TEST_CASE("far from the data the prior returns") {
  const GpModel gp = fit_1d({0.0, 0.1, 0.2}, [](double x) { return 3 * x + 1; }, 0.1, 1e-3);
  const auto p = gp.predict(Vector::Constant(1, 50.0));
  CHECK(std::abs(p.variance - 1.0) < 0.01);
  CHECK(std::abs(p.mean) < 1e-6);
}

TEST_CASE("sin(2 pi x) is recovered from 20 points") {
  std::vector<double> xs;
  for (int i = 0; i < 20; ++i) xs.push_back(i / 19.0);
  const GpModel gp = fit_1d(xs, [](double x) { return std::sin(2 * M_PI * x); }, 0.2, 1e-6);
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double x = i / 200.0;
    worst = std::max(worst, std::abs(gp.predict(Vector::Constant(1, x)).mean - std::sin(2 * M_PI * x)));
  }
  CHECK(worst <= 0.05);
}

TEST_CASE("posterior variance never exceeds the signal variance") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial;
    const Matrix x = random_inputs(2, n, rng);
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = standard_normal(rng);
    const double sv = 0.3 + 2 * uniform01(rng);
    const GpModel gp = GpModel::fit(x, y, Kernel<double>::isotropic(KernelFamily::Matern52, 2, 0.3, sv), 1e-4);
    const auto [m, v] = gp.predict_many(random_inputs(2, 30, rng));
    CHECK((v.array() >= 0.0).all());
    CHECK((v.array() <= sv + 1e-12).all());
  }
}

TEST_CASE("near-duplicate inputs are handled with jitter") {
  Matrix x(1, 3);
  x << 0.5, 0.5, 0.5 + 1e-12;
  Vector y(3);
  y << 1.0, 1.0, 1.0;
  const GpModel gp = GpModel::fit(x, y, Kernel<double>::isotropic(KernelFamily::RBF, 1, 0.2), 0.0);
  CHECK(gp.jitter() > 0.0);
  CHECK(std::isfinite(gp.predict(Vector::Constant(1, 0.3)).mean));
}

TEST_CASE("fit_standardized maps predictions back to target units") {
  Matrix x(1, 15);
  Vector y(15);
  for (int i = 0; i < 15; ++i) {
    x(0, i) = i / 14.0;
    y[i] = 100.0 + 20.0 * x(0, i);
  }
  const auto s = fit_standardized(x, y, Kernel<double>::isotropic(KernelFamily::RBF, 1, 0.3));
  CHECK(s.predict(Vector::Constant(1, 0.5)).mean == doctest::Approx(110.0).epsilon(1e-3));
  CHECK(s.predict_mean(Vector::Constant(1, 0.25)) == doctest::Approx(105.0).epsilon(1e-3));
  CHECK(s.noise_variance() >= 0.0);
}

TEST_CASE("propose_batch") {
  std::vector<double> xs;
  for (int i = 0; i < 25; ++i) xs.push_back(i / 24.0);
  const GpModel gp = fit_1d(xs, [](double x) { return (x - 0.3) * (x - 0.3); }, 0.2, 1e-6);

  SUBCASE("pure exploitation finds the minimum of (x - 0.3)^2") {
    AcquisitionSpec spec;
    spec.exploration_weight = 0.0;
    const auto pts = propose_batch(gp, spec, 1);
    REQUIRE(pts.size() == 1);
    CHECK(std::abs(pts[0][0] - 0.3) < 0.1);
  }
  SUBCASE("noisy EI also lands near the minimum") {
    AcquisitionSpec spec;
    spec.kind = AcquisitionKind::NoisyEI;
    const auto pts = propose_batch(gp, spec, 2);
    CHECK(std::abs(pts[0][0] - 0.3) < 0.1);
  }
  SUBCASE("a batch of 5 holds distinct points in the unit cube") {
    Rng rng(9);
    const Matrix x = random_inputs(2, 12, rng);
    Vector y(12);
    for (int i = 0; i < 12; ++i) y[i] = (x.col(i).array() - 0.5).square().sum();
    const GpModel gp2 = GpModel::fit(x, y, Kernel<double>::isotropic(KernelFamily::RBF, 2, 0.3), 1e-4);
    AcquisitionSpec spec;
    spec.batch_size = 5;
    const auto pts = propose_batch(gp2, spec, 5);
    REQUIRE(pts.size() == 5);
    std::set<std::pair<double, double>> distinct;
    for (const auto& p : pts) {
      CHECK((p.array() >= 0.0).all());
      CHECK((p.array() <= 1.0).all());
      distinct.insert({p[0], p[1]});
    }
    CHECK(distinct.size() == 5);
  }
}

TEST_CASE("halton points are deterministic and inside the cube") {
  const auto a = halton_points(3, 50, 7), b = halton_points(3, 50, 7);
  for (int i = 0; i < 50; ++i) {
    CHECK(a[i] == b[i]);
    CHECK((a[i].array() >= 0.0).all());
    CHECK((a[i].array() < 1.0).all());
  }
}

}  // TEST_SUITE
