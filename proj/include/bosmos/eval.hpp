#pragma once

#include "bosmos/engine.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace bosmos {

struct SyntheticParticipant {
  int model = 0;
  Vector theta;
  std::uint64_t seed = 0;
};

/// Restrictions on how ground truths are drawn; priors of the belief are unaffected.
struct ParticipantOptions {
  std::optional<std::string> true_model;
  /// Parameter name -> [lo, hi] sub-box for the ground-truth draw.
  std::map<std::string, std::pair<double, double>> theta_bounds;
};

SyntheticParticipant sample_participant(const Task& task, std::uint64_t seed, const ParticipantOptions& opts = {});

/// RMS over n_designs random designs of the gap between per-design mean (scaled) responses.
/// Both sides share common random numbers, so identical inputs give exactly zero.
double behavioural_error(const Task& task, int true_model, const Vector& true_theta, int est_model,
                         const Vector& est_theta, int n_designs, int n_reps, std::uint64_t rng_seed);

/// Euclidean distance in box-normalized coordinates.
double parameter_error(const ModelSpec& model, const Vector& true_theta, const Vector& est_theta);

/// Seeds of trial t (1-based) for a run with base seed s; shared by the harness and live sessions.
struct TrialSeeds {
  std::uint64_t design;
  std::uint64_t respond;
  std::uint64_t update;
};
TrialSeeds trial_seeds(std::uint64_t seed, int t);

struct RuleMetrics {
  std::string model;
  Vector theta;
  bool model_correct = false;
  double eta_b = 0.0;
  std::optional<double> eta_p;
};

struct CheckpointRecord {
  int trials = 0;
  RuleMetrics map;
  std::optional<RuleMetrics> bic;
  Vector model_marginals;
};

struct TrialLog {
  int trial = 0;
  DesignVector design;
  ResponseVector response;
  Vector model_marginals;
  bool degenerate = false;
  long n_sims = 0;
  double wall_ms = 0.0;
};

struct ParticipantResult {
  int index = 0;
  SyntheticParticipant truth;
  std::vector<CheckpointRecord> checkpoints;
  std::vector<TrialLog> trials;

  double mean_trial_ms() const;
};

struct BenchmarkOptions {
  std::string task = "demo";
  Method method = Method::Bosmos;
  int n_participants = 20;
  std::vector<int> checkpoints = {1, 2, 4, 20};
  std::uint64_t seed = 0;
  EngineConfig engine;
  int eval_designs = 100;
  int eval_reps = 100;
  int threads = 1;
  ParticipantOptions participants;
};

struct BenchmarkResult {
  BenchmarkOptions options;
  std::vector<ParticipantResult> participants;
};

using TrialCallback = std::function<void(const TrialLog&, const UpdateResult&, const DesignProposal&)>;

/// Runs one synthetic participant through the sequential loop.
ParticipantResult run_participant(const Task& task, const BenchmarkOptions& opts, int index,
                                  const TrialCallback& on_trial = {});

/// Participants run in parallel on opts.threads workers; results are ordered and seed-deterministic.
BenchmarkResult run_benchmark(const BenchmarkOptions& opts);

struct AggregateRow {
  std::string task;
  std::string method;
  int checkpoint = 0;
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

/// Metrics: eta_b, eta_p, eta_m, eta_m[<true model>], and the same with a "bic_" prefix.
std::vector<AggregateRow> aggregate(const BenchmarkResult& result);
const AggregateRow* find_row(const std::vector<AggregateRow>& rows, int checkpoint, std::string_view metric);

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
/// One row per participant and checkpoint. Contains no timings, so reruns are byte-identical.
void write_participant_csv(std::ostream& out, const BenchmarkResult& result);
void write_jsonl(std::ostream& out, const BenchmarkResult& result);
/// Inverse of write_jsonl; options carry only task and method.
BenchmarkResult read_jsonl(std::istream& in);
void write_table(std::ostream& out, const BenchmarkResult& result, const std::vector<AggregateRow>& rows);

/// Worker count from BOSMOS_THREADS, falling back to the hardware concurrency.
int default_thread_count();

}  // namespace bosmos
