#include "bosmos/config.hpp"
#include "bosmos/eval.hpp"
#include "bosmos/server.hpp"
#include "bosmos/session.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace bosmos;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct BenchmarkArgs {
  std::string config;
  std::optional<std::string> task, method, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> participants, particles;
  std::vector<int> checkpoints;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  json doc = json::object();
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ConfigError("cannot read config file " + a.config);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(a.config + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("$: expected an object");
  }
  // Flags override the file.
  if (a.task) doc["task"] = *a.task;
  if (a.method) doc["method"] = *a.method;
  if (a.out) doc["out"] = *a.out;
  if (a.seed) doc["seed"] = *a.seed;
  if (a.participants) doc["participants"] = *a.participants;
  if (!a.checkpoints.empty()) doc["checkpoints"] = a.checkpoints;
  if (a.particles) doc["budgets"]["particles"] = *a.particles;
  const RunConfig cfg = parse_run_config(doc);

  std::filesystem::create_directories(cfg.out_dir);
  const auto result = run_benchmark(cfg.benchmark);
  const auto rows = aggregate(result);
  auto open = [&](const char* name) {
    std::ofstream f(cfg.out_dir / name);
    if (!f) throw std::runtime_error("cannot write " + (cfg.out_dir / name).string());
    return f;
  };
  {
    auto f = open("aggregate.csv");
    write_aggregate_csv(f, rows);
  }
  {
    auto f = open("participants.csv");
    write_participant_csv(f, result);
  }
  {
    auto f = open("participants.jsonl");
    write_jsonl(f, result);
  }
  {
    auto f = open("config.json");
    f << to_json(cfg).dump(2) << '\n';
  }
  auto f = open("table.txt");
  write_table(f, result, rows);
  write_table(std::cout, result, rows);
  return 0;
}

struct SimulateArgs {
  std::string task, method = "bosmos", record;
  std::uint64_t seed = 0;
  int trials = 20;
  std::optional<int> particles;
};

json with_truth(json final_line, const json& extra) {
  if (extra.is_object() && extra.contains("truth")) final_line["truth"] = extra["truth"];
  return final_line;
}

int cmd_simulate(const SimulateArgs& a) {
  if (a.trials < 0) throw ConfigError("--trials must be >= 0");
  const Task& task = find_task(a.task);
  SessionParams p;
  p.task = task.name;
  p.method = parse_method(a.method);
  // A session with no trials cannot exist; it is created with budget 1 and never asked.
  p.budget = std::max(1, a.trials);
  // Same streams as participant 0 of a benchmark with this seed.
  p.seed = derive_seed(a.seed, Stream::Participant, 0);
  if (a.particles) p.engine.n_particles = *a.particles;
  check_method_supported(task, p.method);

  const auto truth = sample_participant(task, derive_seed(p.seed, Stream::Init));
  const json extra = {{"truth", {{"model", task.models[truth.model].id.name},
                                 {"theta", std::vector<double>(truth.theta.data(), truth.theta.data() + truth.theta.size())}}}};

  std::ofstream record;
  Session::EventSink sink;
  if (!a.record.empty()) {
    record.open(a.record, std::ios::trunc);
    if (!record) throw std::runtime_error("cannot write " + a.record);
    sink = [&record](const json& ev) { record << ev.dump() << '\n'; };
  }
  Session s(new_session_id(), p, sink, extra);
  const auto& spec = task.models[truth.model];
  for (int t = 1; t <= a.trials; ++t) {
    const DesignProposal proposal = s.next_design();
    Rng respond(trial_seeds(p.seed, t).respond);
    const auto outcome = s.submit_response(t, spec.simulate(truth.theta, proposal.design, respond));
    std::cout << trial_diagnostics(outcome, proposal).dump() << '\n';
  }
  std::cout << with_truth(final_diagnostics(s), extra).dump() << '\n';
  return 0;
}

int cmd_replay(const std::string& path) {
  const auto events = read_event_log(path);
  const Session s = Session::replay(events, {}, [](const TrialOutcome& outcome, const DesignProposal& proposal) {
    std::cout << trial_diagnostics(outcome, proposal).dump() << '\n';
  });
  std::cout << with_truth(final_diagnostics(s), events.front().value("extra", json())).dump() << '\n';
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1", token, data_dir;
  int port = 8080;
  std::optional<int> particles;
};

SessionServer* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  ServerConfig cfg;
  cfg.host = a.host;
  cfg.port = a.port;
  cfg.token = a.token;
  if (cfg.token.empty())
    if (const char* env = std::getenv("BOSMOS_TOKEN")) cfg.token = env;
  cfg.data_dir = a.data_dir;
  if (a.particles) cfg.engine.n_particles = *a.particles;
  SessionServer server(cfg);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "listening on " << cfg.host << ':' << port << " (" << server.session_count() << " sessions restored)"
            << std::endl;
  server.run();
  g_server = nullptr;
  return 0;
}

int cmd_report(const std::string& dir) {
  const std::filesystem::path path = std::filesystem::path(dir) / "participants.jsonl";
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  const auto result = read_jsonl(in);
  const auto rows = aggregate(result);
  write_table(std::cout, result, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive model-selection experiments: benchmarks, simulated sessions and a live session server"};
  app.require_subcommand(1);

  BenchmarkArgs bench;
  auto* b = app.add_subcommand("benchmark", "Run synthetic participants and write CSV, JSONL and a table");
  b->add_option("--config", bench.config, "JSON run configuration")->check(CLI::ExistingFile);
  b->add_option("--task", bench.task, "Task name");
  b->add_option("--method", bench.method, "bosmos, ado, lbird, prior or random");
  b->add_option("--seed", bench.seed, "Base seed");
  b->add_option("--participants", bench.participants, "Number of synthetic participants");
  b->add_option("--checkpoints", bench.checkpoints, "Trial counts to evaluate, e.g. 1,4,20")->delimiter(',');
  b->add_option("--out", bench.out, "Output directory");
  b->add_option("--particles", bench.particles, "Particles in the belief");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run one synthetic participant and stream per-trial JSON lines");
  s->add_option("--task", sim.task, "Task name")->required();
  s->add_option("--method", sim.method, "bosmos, ado, lbird, prior or random");
  s->add_option("--seed", sim.seed, "Seed");
  s->add_option("--trials", sim.trials, "Number of trials");
  s->add_option("--record", sim.record, "Write the session event log here");
  s->add_option("--particles", sim.particles, "Particles in the belief");

  std::string replay_path;
  auto* r = app.add_subcommand("replay", "Rebuild a recorded session and print its transcript");
  r->add_option("log", replay_path, "Event log written by simulate --record or the server")->required();

  ServeArgs serve;
  auto* sv = app.add_subcommand("serve", "Serve live sessions over HTTP");
  sv->add_option("--host", serve.host, "Bind address");
  sv->add_option("--port", serve.port, "Port, 0 for any");
  sv->add_option("--token", serve.token, "Bearer token (default: $BOSMOS_TOKEN, empty disables)");
  sv->add_option("--data-dir", serve.data_dir, "Directory for session event logs");
  sv->add_option("--particles", serve.particles, "Particles per session belief");

  std::string report_dir;
  auto* rp = app.add_subcommand("report", "Re-render the table of a finished benchmark");
  rp->add_option("dir", report_dir, "Benchmark output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (b->parsed()) return cmd_benchmark(bench);
    if (s->parsed()) return cmd_simulate(sim);
    if (r->parsed()) return cmd_replay(replay_path);
    if (sv->parsed()) return cmd_serve(serve);
    if (rp->parsed()) return cmd_report(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
