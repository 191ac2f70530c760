#include "bosmos/session.hpp"

#include "bosmos/config.hpp"
#include "bosmos/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>

namespace bosmos {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double weighted_quantile(std::vector<std::pair<double, double>> values, double q) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (const auto& [_, w] : values) total += w;
  double acc = 0.0;
  for (const auto& [x, w] : values) {
    acc += w;
    if (acc >= q * total) return x;
  }
  return values.back().first;
}

json estimate_json(const Estimate& e) { return {{"model", e.model.name}, {"theta", to_std(e.theta)}}; }

json marginals_json(const ParticleSet& belief) {
  const Vector m = belief.model_marginals();
  json out = json::object();
  for (int k = 0; k < belief.num_models(); ++k) out[belief.model(k).id.name] = m[k];
  return out;
}

}  // namespace

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Proposing: return "proposing";
    case Phase::AwaitingResponse: return "awaiting_response";
    case Phase::Finished: return "finished";
  }
  return "unknown";
}

Session::Session(std::string id, SessionParams params, EventSink sink, json extra)
    : id_(std::move(id)),
      params_(std::move(params)),
      task_(&find_task(params_.task)),
      sink_(std::move(sink)),
      belief_(initial_belief(*task_, params_.engine, params_.seed)) {
  if (params_.budget < 1) throw ConfigError("budget must be >= 1");
  check_method_supported(*task_, params_.method);
  created_at_ = updated_at_ = utc_now();
  json ev = {{"event", "created"},
             {"session", id_},
             {"task", task_->name},
             {"method", method_name(params_.method)},
             {"budget", params_.budget},
             {"seed", params_.seed},
             {"engine", engine_to_json(params_.engine)}};
  if (!extra.is_null()) ev["extra"] = std::move(extra);
  emit(std::move(ev));
}

void Session::emit(json event) {
  updated_at_ = utc_now();
  if (!sink_) return;
  event["v"] = 1;
  event["time"] = updated_at_;
  sink_(event);
}

DesignProposal Session::compute_proposal() const {
  if (phase_ != Phase::Proposing)
    throw PhaseConflict("session is " + std::string(phase_name(phase_)) + ", no design can be proposed");
  return propose_design(*task_, params_.method, belief_, params_.engine, trial_seeds(params_.seed, current_trial()).design);
}

void Session::accept_proposal(DesignProposal proposal) {
  if (phase_ != Phase::Proposing)
    throw PhaseConflict("session is " + std::string(phase_name(phase_)) + ", no design can be proposed");
  if (!task_->design_space.contains(proposal.design)) throw std::logic_error("proposed design outside the design space");
  pending_ = std::move(proposal);
  phase_ = Phase::AwaitingResponse;
  emit({{"event", "design_proposed"}, {"trial", current_trial()}, {"design", to_std(pending_->design)}});
}

const DesignProposal& Session::next_design() {
  if (phase_ == Phase::Proposing) accept_proposal(compute_proposal());
  if (phase_ != Phase::AwaitingResponse) throw PhaseConflict("session is finished");
  return *pending_;
}

TrialOutcome Session::submit_response(int trial, const ResponseVector& response) {
  if (phase_ == Phase::Finished) throw PhaseConflict("session is finished");
  if (trial < current_trial()) throw PhaseConflict("trial " + std::to_string(trial) + " already has a response");
  if (phase_ != Phase::AwaitingResponse || trial != current_trial())
    throw PhaseConflict("trial " + std::to_string(trial) + " has no design awaiting a response");
  if (!response.allFinite()) throw InvalidResponse("response must be finite");
  try {
    task_->validate_response(response, pending_->design);
  } catch (const std::invalid_argument& e) {
    throw InvalidResponse(e.what());
  }

  TrialRecord record{pending_->design, response, trial, 0};
  const auto start = std::chrono::steady_clock::now();
  TrialOutcome out{record,
                   update_belief(*task_, params_.method, belief_, record, params_.engine,
                                 trial_seeds(params_.seed, trial).update)};
  out.trial.wall_time_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  belief_ = out.update.belief;
  history_.push_back(out.trial);
  pending_.reset();
  phase_ = budget_remaining() == 0 ? Phase::Finished : Phase::Proposing;
  emit({{"event", "response_submitted"}, {"trial", trial}, {"response", to_std(response)}});
  return out;
}

Estimate Session::map() const { return map_estimate(belief_, params_.engine.map_bandwidth); }

json Session::summary() const {
  json j = {{"v", 1},
            {"id", id_},
            {"task", task_->name},
            {"method", method_name(params_.method)},
            {"budget", params_.budget},
            {"budget_remaining", budget_remaining()},
            {"trials_completed", history_.size()},
            {"phase", phase_name(phase_)},
            {"seed", params_.seed},
            {"created_at", created_at_},
            {"updated_at", updated_at_},
            {"model_marginals", marginals_json(belief_)}};
  if (pending_) j["pending_design"] = {{"trial", current_trial()}, {"design", to_std(pending_->design)}};
  if (phase_ == Phase::Finished) j["map"] = estimate_json(map());
  return j;
}

json Session::posterior_snapshot() const {
  const Vector marg = belief_.model_marginals();
  json models = json::array();
  for (int k = 0; k < belief_.num_models(); ++k) {
    const auto& box = belief_.model(k);
    const auto& spec = task_->models[k];
    json m = {{"name", box.id.name}, {"marginal", marg[k]}, {"alive", belief_.alive(k)}};
    json names = json::array();
    for (const auto& p : spec.params) names.push_back(p.name);
    m["params"] = names;

    std::vector<const Particle*> own;
    for (const auto& p : belief_.particles())
      if (p.model == k) own.push_back(&p);
    m["n_particles"] = own.size();
    json scatter = json::array();
    if (own.empty()) {
      m["mean"] = nullptr;
      m["box"] = nullptr;
    } else {
      const int dim = box.dim();
      Vector mean = Vector::Zero(dim);
      double wsum = 0.0;
      for (const auto* p : own) {
        mean += p->weight * p->theta;
        wsum += p->weight;
      }
      mean /= wsum;
      Vector lo(dim), hi(dim);
      for (int j = 0; j < dim; ++j) {
        std::vector<std::pair<double, double>> col;
        col.reserve(own.size());
        for (const auto* p : own) col.emplace_back(p->theta[j], p->weight);
        lo[j] = weighted_quantile(col, 0.05);
        hi[j] = weighted_quantile(std::move(col), 0.95);
      }
      m["mean"] = to_std(mean);
      m["box"] = {{"level", 0.9}, {"lower", to_std(lo)}, {"upper", to_std(hi)}};
      const size_t stride = (own.size() + kMaxScatterPoints - 1) / kMaxScatterPoints;
      for (size_t i = 0; i < own.size(); i += stride) {
        const auto& th = own[i]->theta;
        scatter.push_back(std::vector<double>(th.data(), th.data() + std::min<Eigen::Index>(2, th.size())));
      }
    }
    m["scatter"] = std::move(scatter);
    models.push_back(std::move(m));
  }

  json history = json::array();
  for (const auto& t : history_)
    history.push_back({{"trial", t.trial_index}, {"design", to_std(t.design)}, {"response", to_std(t.response)}});

  json j = {{"v", 1},
            {"id", id_},
            {"trial", history_.size()},
            {"phase", phase_name(phase_)},
            {"budget_remaining", budget_remaining()},
            {"model_marginals", marginals_json(belief_)},
            {"models", std::move(models)},
            {"history", std::move(history)}};
  if (phase_ == Phase::Finished) j["map"] = estimate_json(map());
  return j;
}

Session Session::replay(const std::vector<json>& events, EventSink sink,
                        const std::function<void(const TrialOutcome&, const DesignProposal&)>& on_trial) {
  if (events.empty() || events.front().value("event", "") != "created")
    throw ConfigError("event log must start with a created event");
  const json& c = events.front();
  SessionParams params;
  try {
    params.task = c.at("task").get<std::string>();
    params.method = parse_method(c.at("method").get<std::string>());
    params.budget = c.at("budget").get<int>();
    params.seed = c.at("seed").get<std::uint64_t>();
    params.engine = engine_from_json(c.at("engine"), "$.engine");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed created event: ") + e.what());
  }
  Session s(c.value("session", ""), params, std::move(sink), c.value("extra", json()));
  s.created_at_ = c.value("time", s.created_at_);

  for (size_t i = 1; i < events.size(); ++i) {
    const json& ev = events[i];
    const std::string kind = ev.value("event", "");
    const int trial = ev.value("trial", 0);
    if (trial != s.current_trial()) throw ConfigError("event " + std::to_string(i) + " is out of order");
    if (kind == "design_proposed") {
      auto proposal = s.compute_proposal();
      if (to_vector(ev.at("design")) != proposal.design)
        throw std::runtime_error("replay diverged: trial " + std::to_string(trial) + " proposes a different design");
      s.accept_proposal(std::move(proposal));
    } else if (kind == "response_submitted") {
      if (!s.pending_) throw ConfigError("event " + std::to_string(i) + " answers a trial without a design");
      const DesignProposal proposal = *s.pending_;
      const auto outcome = s.submit_response(trial, to_vector(ev.at("response")));
      if (on_trial) on_trial(outcome, proposal);
    } else {
      throw ConfigError("event " + std::to_string(i) + " has unknown kind '" + kind + "'");
    }
    s.updated_at_ = ev.value("time", s.updated_at_);
  }
  return s;
}

json trial_diagnostics(const TrialOutcome& outcome, const DesignProposal& proposal) {
  json j = {{"v", 1},
            {"trial", outcome.trial.trial_index},
            {"design", to_std(outcome.trial.design)},
            {"response", to_std(outcome.trial.response)},
            {"degenerate", outcome.update.degenerate},
            {"n_sims", proposal.n_sims + outcome.update.n_sims},
            {"model_marginals", marginals_json(outcome.update.belief)}};
  if (proposal.trace.contains("candidates")) {
    for (const auto& cand : proposal.trace["candidates"])
      if (cand.at("design") == j["design"]) j["design_utility"] = cand.at("utility");
  }
  const auto& d = outcome.update.diagnostics;
  if (d.contains("per_model")) j["per_model"] = d["per_model"];
  if (d.contains("eta")) j["eta"] = d["eta"];
  return j;
}

json final_diagnostics(const Session& s) {
  return {{"v", 1},
          {"final", true},
          {"trials", s.history().size()},
          {"phase", phase_name(s.phase())},
          {"map", estimate_json(s.map())},
          {"model_marginals", marginals_json(s.belief())}};
}

std::vector<json> read_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read event log " + path);
  std::vector<json> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
  }
  return events;
}

}  // namespace bosmos
