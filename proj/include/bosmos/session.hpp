#pragma once

#include "bosmos/engine.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bosmos {

enum class Phase { Proposing, AwaitingResponse, Finished };
std::string_view phase_name(Phase p);

/// Illegal call for the current phase, or a response for a trial that is already answered.
struct PhaseConflict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Response rejected by the task's validator; the session is unchanged.
struct InvalidResponse : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SessionParams {
  std::string task;
  Method method = Method::Bosmos;
  int budget = 20;
  /// Drives the initial belief and every trial's streams, exactly as for a benchmark participant.
  std::uint64_t seed = 0;
  EngineConfig engine;
};

/// Outcome of one submitted response.
struct TrialOutcome {
  TrialRecord trial;
  UpdateResult update;
};

/// One live adaptive experiment. Not thread-safe; callers serialize writes.
///
/// Every state change is emitted as an event (created, design_proposed, response_submitted).
/// Feeding the same events to replay() rebuilds an identical session.
class Session {
 public:
  using EventSink = std::function<void(const nlohmann::json&)>;

  /// `extra` is stored verbatim in the created event (e.g. the ground truth of a synthetic run).
  Session(std::string id, SessionParams params, EventSink sink = {}, nlohmann::json extra = nullptr);

  const std::string& id() const { return id_; }
  const SessionParams& params() const { return params_; }
  const Task& task() const { return *task_; }
  Phase phase() const { return phase_; }
  const ParticleSet& belief() const { return belief_; }
  const std::vector<TrialRecord>& history() const { return history_; }
  int budget_remaining() const { return params_.budget - static_cast<int>(history_.size()); }
  /// 1-based index of the trial being proposed or awaited.
  int current_trial() const { return static_cast<int>(history_.size()) + 1; }
  const std::optional<DesignProposal>& pending_design() const { return pending_; }
  void set_sink(EventSink sink) { sink_ = std::move(sink); }

  /// Runs the design search for the current trial without touching the session.
  DesignProposal compute_proposal() const;
  /// Installs a proposal computed for the current trial; phase -> awaiting_response.
  void accept_proposal(DesignProposal proposal);
  /// compute_proposal + accept_proposal, or the already pending design.
  const DesignProposal& next_design();

  /// Validates and applies the response to the current trial. Throws PhaseConflict when
  /// `trial` is not the trial awaiting a response, InvalidResponse when the task rejects it.
  TrialOutcome submit_response(int trial, const ResponseVector& response);

  Estimate map() const;
  nlohmann::json summary() const;
  /// Marginals, per-model means and 90% credible boxes, downsampled scatter and history.
  nlohmann::json posterior_snapshot() const;

  /// Rebuilds a session from its event log. Designs are recomputed and must match the log.
  static Session replay(const std::vector<nlohmann::json>& events, EventSink sink = {},
                        const std::function<void(const TrialOutcome&, const DesignProposal&)>& on_trial = {});

 private:
  void emit(nlohmann::json event);

  std::string id_;
  SessionParams params_;
  const Task* task_;
  EventSink sink_;
  ParticleSet belief_;
  std::vector<TrialRecord> history_;
  std::optional<DesignProposal> pending_;
  Phase phase_ = Phase::Proposing;
  std::string created_at_;
  std::string updated_at_;
};

/// Per-trial diagnostics line shared by `simulate` and `replay`.
nlohmann::json trial_diagnostics(const TrialOutcome& outcome, const DesignProposal& proposal);
/// Final line of a session transcript: MAP estimate and model marginals.
nlohmann::json final_diagnostics(const Session& s);

std::vector<nlohmann::json> read_event_log(const std::string& path);

/// Maximum scatter points per model in posterior snapshots.
inline constexpr int kMaxScatterPoints = 1000;

}  // namespace bosmos
