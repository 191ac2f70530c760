#include "doctest.h"
#include "helpers.hpp"

#include "bosmos/eval.hpp"
#include "bosmos/session.hpp"

using namespace bosmos;
using namespace testing;
using nlohmann::json;

namespace {

SessionParams params(std::string task, Method method = Method::Bosmos, int budget = 3, std::uint64_t seed = 1) {
  SessionParams p;
  p.task = std::move(task);
  p.method = method;
  p.budget = budget;
  p.seed = seed;
  p.engine.n_particles = 500;
  return p;
}

ResponseVector answer(const Session& s, const DesignVector& d, int t) {
  const auto& task = s.task();
  Rng rng(derive_seed(s.params().seed, Stream::Respond, t));
  return task.models[0].simulate(task.models[0].sample_prior(rng), d, rng);
}

}  // namespace

TEST_SUITE("session") {

TEST_CASE("a budget of one finishes after exactly one response") {
  Session s("a", params("memory", Method::Ado, 1));
  CHECK(s.phase() == Phase::Proposing);
  const auto d = s.next_design().design;
  CHECK(s.phase() == Phase::AwaitingResponse);
  s.submit_response(1, answer(s, d, 1));
  CHECK(s.phase() == Phase::Finished);
  CHECK(s.budget_remaining() == 0);
  CHECK_THROWS_AS(s.next_design(), PhaseConflict);
  CHECK(s.summary().contains("map"));
  CHECK(s.posterior_snapshot().contains("map"));
}

TEST_CASE("same seed, same first design; memory designs are lags in [0, 100]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Session a("a", params("memory", Method::Bosmos, 3, seed)), b("b", params("memory", Method::Bosmos, 3, seed));
    const auto da = a.next_design().design;
    CHECK(da == b.next_design().design);
    CHECK(da[0] >= 0.0);
    CHECK(da[0] <= 100.0);
  }
}

TEST_CASE("next_design is idempotent until a response arrives") {
  Session s("a", params("risky", Method::Random));
  const auto first = s.next_design().design;
  CHECK(s.next_design().design == first);
  CHECK(s.next_design().design == first);
  s.submit_response(1, vec({1.0}));
  CHECK(s.next_design().design != first);
}

TEST_CASE("proposing never mutates the belief") {
  Session s("a", params("demo"));
  const json before = s.posterior_snapshot()["models"];
  (void)s.compute_proposal();
  CHECK(s.posterior_snapshot()["models"] == before);
  s.next_design();
  CHECK(s.posterior_snapshot()["models"] == before);
}

TEST_CASE("conflicting and malformed responses leave the session unchanged") {
  Session s("a", params("memory", Method::Lbird));
  CHECK_THROWS_AS(s.submit_response(1, vec({1.0})), PhaseConflict);  // no design yet
  const auto d = s.next_design().design;
  const json before = s.posterior_snapshot();
  CHECK_THROWS_AS(s.submit_response(2, vec({1.0})), PhaseConflict);
  CHECK_THROWS_AS(s.submit_response(1, vec({0.5})), InvalidResponse);
  CHECK_THROWS_AS(s.submit_response(1, vec({1.0, 0.0})), InvalidResponse);
  CHECK_THROWS_AS(s.submit_response(1, vec({std::nan("")})), InvalidResponse);
  CHECK(s.posterior_snapshot() == before);
  CHECK(s.phase() == Phase::AwaitingResponse);

  s.submit_response(1, answer(s, d, 1));
  const json after = s.posterior_snapshot();
  CHECK_THROWS_WITH_AS(s.submit_response(1, vec({1.0})), doctest::Contains("already has a response"), PhaseConflict);
  CHECK(s.posterior_snapshot() == after);
  CHECK(s.history().size() == 1);
}

TEST_CASE("posterior snapshots") {
  Session s("a", params("risky", Method::Lbird, 4));
  const json fresh = s.posterior_snapshot();
  CHECK(fresh["v"] == 1);
  for (const auto& [name, p] : fresh["model_marginals"].items()) CHECK(std::abs(p.get<double>() - 0.25) < 0.05);
  CHECK(fresh["history"].empty());
  for (const auto& m : fresh["models"]) {
    CHECK(m["scatter"].size() <= static_cast<size_t>(kMaxScatterPoints));
    const auto lo = m["box"]["lower"].get<std::vector<double>>(), hi = m["box"]["upper"].get<std::vector<double>>();
    for (size_t j = 0; j < lo.size(); ++j) CHECK(lo[j] <= hi[j]);
  }
  for (int t = 1; t <= 4; ++t) {
    const auto d = s.next_design().design;
    s.submit_response(t, answer(s, d, t));
    CHECK(s.posterior_snapshot()["history"].size() == static_cast<size_t>(t));
  }
  CHECK(s.posterior_snapshot()["phase"] == "finished");
}

TEST_CASE("a dead model has zero marginal and an empty scatter") {
  // x = +3 at noise 0.001 has zero exact likelihood under every negative-mean particle.
  Session s("a", params("demo", Method::Lbird, 2));
  s.accept_proposal({vec({0.001}), json::object(), 0});
  s.submit_response(1, vec({3.0}));
  const json snap = s.posterior_snapshot();
  const json& nm = snap["models"][1];
  CHECK(nm["name"] == "NM");
  CHECK_FALSE(nm["alive"].get<bool>());
  CHECK(nm["marginal"] == 0.0);
  CHECK(nm["n_particles"] == 0);
  CHECK(nm["scatter"].empty());
  CHECK(nm["box"].is_null());
  CHECK(snap["model_marginals"]["NM"] == 0.0);
  CHECK(snap["models"][0]["scatter"].size() > 0);
}

TEST_CASE("replaying the event log rebuilds an identical session") {
  std::vector<json> events;
  Session s("abc", params("demo", Method::Bosmos, 3, 9), [&](const json& e) { events.push_back(e); });
  for (int t = 1; t <= 3; ++t) {
    const auto d = s.next_design().design;
    s.submit_response(t, answer(s, d, t));
  }
  REQUIRE(events.size() == 7);
  for (const auto& e : events) CHECK(e["v"] == 1);
  int calls = 0;
  const Session r = Session::replay(events, {}, [&](const TrialOutcome&, const DesignProposal&) { ++calls; });
  CHECK(calls == 3);
  CHECK(r.posterior_snapshot() == s.posterior_snapshot());
  CHECK(r.summary() == s.summary());

  auto tampered = events;
  tampered[1]["design"] = std::vector<double>{4.999};
  CHECK_THROWS(Session::replay(tampered));
  CHECK_THROWS_AS(Session::replay({}), ConfigError);
}

TEST_CASE("demo: x = +3 at a precise design raises the positive-mean model") {
  int raised = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto p = params("demo", Method::Bosmos, 1, seed);
    p.engine.n_particles = 300;
    Session s("d", p);
    const double before = s.belief().model_marginals()[0];
    s.accept_proposal({vec({0.001}), json::object(), 0});
    s.submit_response(1, vec({3.0}));
    raised += s.belief().model_marginals()[0] > before;
  }
  CHECK(raised >= 95);
}

TEST_CASE("random-method designs follow the design prior") {
  // One-sample Kolmogorov-Smirnov test against Uniform(0, 100) at the 5% level.
  std::vector<double> lags;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto p = params("memory", Method::Random, 1, seed);
    p.engine.n_particles = 10;
    Session s("r", p);
    lags.push_back(s.next_design().design[0] / 100.0);
  }
  std::sort(lags.begin(), lags.end());
  double ks = 0.0;
  for (size_t i = 0; i < lags.size(); ++i)
    ks = std::max({ks, std::abs(lags[i] - double(i) / lags.size()), std::abs(double(i + 1) / lags.size() - lags[i])});
  CHECK(ks < 1.36 / std::sqrt(200.0));
}

TEST_CASE("sessions follow the benchmark participant streams") {
  // A session seeded like participant 0 proposes the same first design as the harness.
  BenchmarkOptions o;
  o.task = "memory";
  o.method = Method::Ado;
  o.n_participants = 1;
  o.checkpoints = {1};
  o.seed = 5;
  o.engine.n_particles = 500;
  o.eval_designs = o.eval_reps = 2;
  const auto r = run_participant(find_task("memory"), o, 0);
  auto p = params("memory", Method::Ado, 1, derive_seed(o.seed, Stream::Participant, 0));
  Session s("x", p);
  CHECK(s.next_design().design == r.trials[0].design);
}

TEST_CASE("invalid sessions are refused") {
  CHECK_THROWS_AS(Session("a", params("demo", Method::Bosmos, 0)), ConfigError);
  CHECK_THROWS_AS(Session("a", params("sigdet", Method::Ado)), ConfigError);
  CHECK_THROWS_AS(Session("a", params("nope")), ConfigError);
}

}  // TEST_SUITE
