#include "bosmos/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <mutex>
#include <thread>

namespace bosmos {

namespace {

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double sample_restricted(const ParamDim& p, double lo, double hi, Rng& rng) {
  lo = std::max(lo, p.lower);
  hi = std::min(hi, p.upper);
  if (!(lo <= hi)) throw ConfigError("empty ground-truth range for parameter " + p.name);
  if (p.prior.kind == Prior::Kind::Uniform) return lo + (hi - lo) * uniform01(rng);
  for (int i = 0; i < 100000; ++i) {
    const double x = p.sample(rng);
    if (x >= lo && x <= hi) return x;
  }
  throw ConfigError("ground-truth range for parameter " + p.name + " has negligible prior mass");
}

RuleMetrics evaluate_rule(const Task& task, const SyntheticParticipant& truth, const Estimate& est,
                          const BenchmarkOptions& opts, std::uint64_t eval_seed) {
  RuleMetrics m;
  m.model = est.model.name;
  m.theta = est.theta;
  m.model_correct = est.model.index == truth.model;
  m.eta_b = behavioural_error(task, truth.model, truth.theta, est.model.index, est.theta, opts.eval_designs,
                              opts.eval_reps, eval_seed);
  if (m.model_correct) m.eta_p = parameter_error(task.models[truth.model], truth.theta, est.theta);
  return m;
}

std::vector<int> normalized_checkpoints(std::vector<int> cps) {
  for (int c : cps)
    if (c < 0) throw ConfigError("checkpoints must be >= 0");
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  return cps;
}

struct Stat {
  double sum = 0.0;
  double sum_sq = 0.0;
  int n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return sum / n; }
  double sd() const {
    if (n < 2) return 0.0;
    return std::sqrt(std::max(0.0, (sum_sq - sum * sum / n) / (n - 1)));
  }
};

}  // namespace

SyntheticParticipant sample_participant(const Task& task, std::uint64_t seed, const ParticipantOptions& opts) {
  Rng rng(seed);
  SyntheticParticipant p;
  p.seed = seed;
  if (opts.true_model) {
    p.model = task.model_index(*opts.true_model);
  } else {
    std::discrete_distribution<int> pick(task.model_prior.data(), task.model_prior.data() + task.model_prior.size());
    p.model = pick(rng);
  }
  const auto& spec = task.models[p.model];
  p.theta.resize(spec.dim());
  for (int j = 0; j < spec.dim(); ++j) {
    const auto& dim = spec.params[j];
    const auto it = opts.theta_bounds.find(dim.name);
    p.theta[j] = it == opts.theta_bounds.end() ? dim.sample(rng)
                                                : sample_restricted(dim, it->second.first, it->second.second, rng);
  }
  return p;
}

double behavioural_error(const Task& task, int true_model, const Vector& true_theta, int est_model,
                         const Vector& est_theta, int n_designs, int n_reps, std::uint64_t rng_seed) {
  if (n_designs < 1 || n_reps < 1) throw ConfigError("behavioural error needs designs and repetitions");
  Rng design_rng(derive_seed(rng_seed, Stream::Evaluate));
  const auto& truth = task.models[true_model];
  const auto& est = task.models[est_model];
  double total = 0.0;
  for (int i = 0; i < n_designs; ++i) {
    const DesignVector d = task.design_space.sample(design_rng);
    const std::uint64_t s = derive_seed(rng_seed, Stream::Evaluate, static_cast<std::uint64_t>(i) + 1);
    Rng rt(s);
    Rng re(s);
    Vector mt = Vector::Zero(task.response_scale.size());
    Vector me = Vector::Zero(task.response_scale.size());
    for (int r = 0; r < n_reps; ++r) {
      mt += task.scaled(truth.simulate(true_theta, d, rt));
      me += task.scaled(est.simulate(est_theta, d, re));
    }
    total += ((mt - me) / n_reps).squaredNorm();
  }
  return std::sqrt(total / n_designs);
}

double parameter_error(const ModelSpec& model, const Vector& true_theta, const Vector& est_theta) {
  const Vector width = (model.upper() - model.lower()).array().max(1e-300);
  return ((true_theta - est_theta).array() / width.array()).matrix().norm();
}

TrialSeeds trial_seeds(std::uint64_t seed, int t) {
  const auto i = static_cast<std::uint64_t>(t);
  return {derive_seed(seed, Stream::Design, i), derive_seed(seed, Stream::Respond, i),
          derive_seed(seed, Stream::Inference, i)};
}

double ParticipantResult::mean_trial_ms() const {
  if (trials.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trials) s += t.wall_ms;
  return s / static_cast<double>(trials.size());
}

ParticipantResult run_participant(const Task& task, const BenchmarkOptions& opts, int index,
                                  const TrialCallback& on_trial) {
  check_method_supported(task, opts.method);
  const auto checkpoints = normalized_checkpoints(opts.checkpoints);
  const std::uint64_t pseed = derive_seed(opts.seed, Stream::Participant, static_cast<std::uint64_t>(index));
  const std::uint64_t eval_seed = derive_seed(pseed, Stream::Evaluate);

  ParticipantResult out;
  out.index = index;
  out.truth = sample_participant(task, derive_seed(pseed, Stream::Init), opts.participants);

  ParticleSet belief = initial_belief(task, opts.engine, pseed);
  std::vector<TrialRecord> history;
  auto record = [&](int t) {
    CheckpointRecord cp;
    cp.trials = t;
    cp.model_marginals = belief.model_marginals();
    cp.map = evaluate_rule(task, out.truth, map_estimate(belief, opts.engine.map_bandwidth), opts, eval_seed);
    if (!history.empty()) cp.bic = evaluate_rule(task, out.truth, bic_estimate(belief, history), opts, eval_seed);
    out.checkpoints.push_back(std::move(cp));
  };

  const int horizon = checkpoints.empty() ? 0 : checkpoints.back();
  auto next_cp = checkpoints.begin();
  if (next_cp != checkpoints.end() && *next_cp == 0) {
    record(0);
    ++next_cp;
  }
  const auto& true_spec = task.models[out.truth.model];
  for (int t = 1; t <= horizon; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto seeds = trial_seeds(pseed, t);
    const auto proposal = propose_design(task, opts.method, belief, opts.engine, seeds.design);
    Rng respond(seeds.respond);
    TrialRecord trial{proposal.design, true_spec.simulate(out.truth.theta, proposal.design, respond), t, 0};
    auto update = update_belief(task, opts.method, belief, trial, opts.engine, seeds.update);
    belief = update.belief;
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    trial.wall_time_ms = static_cast<std::int64_t>(ms);
    history.push_back(trial);

    TrialLog log{t, trial.design, trial.response, belief.model_marginals(), update.degenerate,
                 proposal.n_sims + update.n_sims, ms};
    if (on_trial) on_trial(log, update, proposal);
    out.trials.push_back(std::move(log));

    if (next_cp != checkpoints.end() && *next_cp == t) {
      record(t);
      ++next_cp;
    }
  }
  return out;
}

int default_thread_count() {
  if (const char* env = std::getenv("BOSMOS_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

BenchmarkResult run_benchmark(const BenchmarkOptions& opts) {
  if (opts.n_participants < 1) throw ConfigError("n_participants must be >= 1");
  const Task& task = find_task(opts.task);
  check_method_supported(task, opts.method);

  BenchmarkResult result;
  result.options = opts;
  result.participants.resize(opts.n_participants);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i = next++; i < opts.n_participants; i = next++) {
      try {
        result.participants[i] = run_participant(task, opts, i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(opts.threads, 1, opts.n_participants);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

std::vector<AggregateRow> aggregate(const BenchmarkResult& result) {
  const Task& task = find_task(result.options.task);
  const std::string method(method_name(result.options.method));
  std::vector<AggregateRow> rows;
  if (result.participants.empty()) return rows;

  const size_t n_cp = result.participants.front().checkpoints.size();
  for (size_t c = 0; c < n_cp; ++c) {
    const int t = result.participants.front().checkpoints[c].trials;
    for (const std::string prefix : {"", "bic_"}) {
      std::map<std::string, Stat> stats;
      for (const auto& p : result.participants) {
        const auto& cp = p.checkpoints[c];
        const RuleMetrics* m = prefix.empty() ? &cp.map : (cp.bic ? &*cp.bic : nullptr);
        if (!m) continue;
        stats["eta_b"].add(m->eta_b);
        if (m->eta_p) stats["eta_p"].add(*m->eta_p);
        stats["eta_m"].add(m->model_correct ? 1.0 : 0.0);
        stats["eta_m[" + task.models[p.truth.model].id.name + "]"].add(m->model_correct ? 1.0 : 0.0);
      }
      std::vector<std::string> order = {"eta_b", "eta_p", "eta_m"};
      for (const auto& spec : task.models) order.push_back("eta_m[" + spec.id.name + "]");
      for (const auto& name : order) {
        auto it = stats.find(name);
        if (it == stats.end() || it->second.n == 0) continue;
        rows.push_back({task.name, method, t, prefix + name, it->second.mean(), it->second.sd(), it->second.n});
      }
    }
  }
  return rows;
}

const AggregateRow* find_row(const std::vector<AggregateRow>& rows, int checkpoint, std::string_view metric) {
  for (const auto& r : rows)
    if (r.checkpoint == checkpoint && r.metric == metric) return &r;
  return nullptr;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "task,method,checkpoint,metric,mean,sd,n\n";
  for (const auto& r : rows)
    out << r.task << ',' << r.method << ',' << r.checkpoint << ',' << r.metric << ',' << fmt(r.mean) << ','
        << fmt(r.sd) << ',' << r.n << '\n';
}

void write_participant_csv(std::ostream& out, const BenchmarkResult& result) {
  const Task& task = find_task(result.options.task);
  const std::string method(method_name(result.options.method));
  out << "task,method,participant,checkpoint,true_model,map_model,map_correct,eta_b,eta_p,bic_model,bic_correct,"
         "bic_eta_b\n";
  for (const auto& p : result.participants) {
    for (const auto& cp : p.checkpoints) {
      out << task.name << ',' << method << ',' << p.index << ',' << cp.trials << ','
          << task.models[p.truth.model].id.name << ',' << cp.map.model << ',' << (cp.map.model_correct ? 1 : 0)
          << ',' << fmt(cp.map.eta_b) << ',' << (cp.map.eta_p ? fmt(*cp.map.eta_p) : "") << ',';
      if (cp.bic)
        out << cp.bic->model << ',' << (cp.bic->model_correct ? 1 : 0) << ',' << fmt(cp.bic->eta_b);
      else
        out << ",,";
      out << '\n';
    }
  }
}

void write_jsonl(std::ostream& out, const BenchmarkResult& result) {
  const Task& task = find_task(result.options.task);
  auto rule_json = [](const RuleMetrics& m) {
    nlohmann::json j = {{"model", m.model}, {"theta", to_std(m.theta)}, {"correct", m.model_correct}, {"eta_b", m.eta_b}};
    j["eta_p"] = m.eta_p ? nlohmann::json(*m.eta_p) : nlohmann::json(nullptr);
    return j;
  };
  for (const auto& p : result.participants) {
    nlohmann::json j;
    j["v"] = 1;
    j["task"] = task.name;
    j["method"] = method_name(result.options.method);
    j["participant"] = p.index;
    j["truth"] = {{"model", task.models[p.truth.model].id.name}, {"theta", to_std(p.truth.theta)}};
    j["checkpoints"] = nlohmann::json::array();
    for (const auto& cp : p.checkpoints) {
      nlohmann::json c = {{"trials", cp.trials}, {"map", rule_json(cp.map)}, {"model_marginals", to_std(cp.model_marginals)}};
      if (cp.bic) c["bic"] = rule_json(*cp.bic);
      j["checkpoints"].push_back(std::move(c));
    }
    j["trials"] = nlohmann::json::array();
    for (const auto& t : p.trials)
      j["trials"].push_back({{"trial", t.trial},
                             {"design", to_std(t.design)},
                             {"response", to_std(t.response)},
                             {"model_marginals", to_std(t.model_marginals)},
                             {"degenerate", t.degenerate},
                             {"n_sims", t.n_sims},
                             {"wall_ms", t.wall_ms}});
    out << j.dump() << '\n';
  }
}

BenchmarkResult read_jsonl(std::istream& in) {
  using nlohmann::json;
  auto vec = [](const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  auto rule = [&](const json& j) {
    RuleMetrics m;
    m.model = j.at("model").get<std::string>();
    m.theta = vec(j.at("theta"));
    m.model_correct = j.at("correct").get<bool>();
    m.eta_b = j.at("eta_b").get<double>();
    if (!j.at("eta_p").is_null()) m.eta_p = j.at("eta_p").get<double>();
    return m;
  };

  BenchmarkResult result;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const Task& task = find_task(j.at("task").get<std::string>());
      const Method method = parse_method(j.at("method").get<std::string>());
      if (result.participants.empty()) {
        result.options.task = task.name;
        result.options.method = method;
      } else if (task.name != result.options.task || method != result.options.method) {
        throw ConfigError("mixes several task/method pairs");
      }
      ParticipantResult p;
      p.index = j.at("participant").get<int>();
      p.truth.model = task.model_index(j.at("truth").at("model").get<std::string>());
      p.truth.theta = vec(j.at("truth").at("theta"));
      for (const auto& c : j.at("checkpoints")) {
        CheckpointRecord cp;
        cp.trials = c.at("trials").get<int>();
        cp.map = rule(c.at("map"));
        cp.model_marginals = vec(c.at("model_marginals"));
        if (c.contains("bic")) cp.bic = rule(c.at("bic"));
        p.checkpoints.push_back(std::move(cp));
      }
      for (const auto& t : j.at("trials"))
        p.trials.push_back({t.at("trial").get<int>(), vec(t.at("design")), vec(t.at("response")),
                            vec(t.at("model_marginals")), t.at("degenerate").get<bool>(), t.at("n_sims").get<long>(),
                            t.at("wall_ms").get<double>()});
      result.participants.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  result.options.n_participants = static_cast<int>(result.participants.size());
  return result;
}

void write_table(std::ostream& out, const BenchmarkResult& result, const std::vector<AggregateRow>& rows) {
  std::vector<int> cps;
  std::vector<std::string> metrics;
  for (const auto& r : rows) {
    if (std::find(cps.begin(), cps.end(), r.checkpoint) == cps.end()) cps.push_back(r.checkpoint);
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  char buf[128];
  out << "task " << result.options.task << ", method " << method_name(result.options.method) << ", "
      << result.participants.size() << " participants\n";
  std::snprintf(buf, sizeof buf, "%-18s", "metric");
  out << buf;
  for (int c : cps) {
    std::snprintf(buf, sizeof buf, " %22s", ("t=" + std::to_string(c)).c_str());
    out << buf;
  }
  out << '\n';
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%-18s", m.c_str());
    out << buf;
    for (int c : cps) {
      const auto* r = find_row(rows, c, m);
      if (r)
        std::snprintf(buf, sizeof buf, " %22s", (fmt(r->mean) + " +- " + fmt(r->sd)).c_str());
      else
        std::snprintf(buf, sizeof buf, " %22s", "-");
      out << buf;
    }
    out << '\n';
  }
  double ms = 0.0;
  for (const auto& p : result.participants) ms += p.mean_trial_ms();
  if (!result.participants.empty()) ms /= static_cast<double>(result.participants.size());
  std::snprintf(buf, sizeof buf, "mean wall time per trial: %.1f ms\n", ms);
  out << buf;
}

}  // namespace bosmos
