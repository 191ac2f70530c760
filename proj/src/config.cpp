#include "bosmos/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace bosmos {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

// Reads the members of one object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) fail(path_, "expected an object");
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, int& out, int min) {
    if (const json* j = get(key)) {
      if (!j->is_number_integer() || j->get<long long>() < min)
        fail(child(key), "expected an integer >= " + std::to_string(min));
      out = j->get<int>();
    }
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (const json* j = get(key)) {
      if (!j->is_number_unsigned() && !(j->is_number_integer() && j->get<long long>() >= 0))
        fail(child(key), "expected a nonnegative integer");
      out = j->get<std::uint64_t>();
    }
  }

  void read(const std::string& key, double& out) {
    if (const json* j = get(key)) {
      if (!j->is_number()) fail(child(key), "expected a number");
      out = j->get<double>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* j = get(key)) {
      if (!j->is_string()) fail(child(key), "expected a string");
      out = j->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items())
      if (!seen_.count(key)) fail(child(key), "unknown key");
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

std::string_view marginal_rule_name(MarginalRule rule) {
  return rule == MarginalRule::KernelOfMean ? "kernel_of_mean" : "expected_kernel";
}

MarginalRule parse_marginal_rule(std::string_view name) {
  if (name == "kernel_of_mean") return MarginalRule::KernelOfMean;
  if (name == "expected_kernel") return MarginalRule::ExpectedKernel;
  throw ConfigError("unknown marginal rule '" + std::string(name) + "' (expected kernel_of_mean or expected_kernel)");
}

json engine_to_json(const EngineConfig& c) {
  return {{"particles", c.n_particles},
          {"jitter_scale", c.jitter_scale},
          {"design_model_draws", c.utility.n_model_draws},
          {"design_sims_per_draw", c.utility.n_sims_per_draw},
          {"design_bo_init", c.utility.bo_init},
          {"design_bo_steps", c.utility.bo_steps},
          {"entropy_bandwidth", c.utility.entropy_bandwidth},
          {"inference_sims", c.inference.total},
          {"inference_initial", c.inference.initial},
          {"inference_batch", c.inference.batch_size},
          {"inference_exploration", c.inference.exploration_weight},
          {"inference_lengthscale", c.inference.lengthscale},
          {"marginal_draws", c.marginal_draws},
          {"marginal_rule", marginal_rule_name(c.marginal_rule)},
          {"ado_theta_draws", c.ado_theta},
          {"map_bandwidth", c.map_bandwidth}};
}

EngineConfig engine_from_json(const json& doc, const std::string& path) {
  EngineConfig c;
  ObjectReader r(doc, path);
  r.read("particles", c.n_particles, 1);
  r.read("jitter_scale", c.jitter_scale);
  r.read("design_model_draws", c.utility.n_model_draws, 1);
  r.read("design_sims_per_draw", c.utility.n_sims_per_draw, 1);
  r.read("design_bo_init", c.utility.bo_init, 1);
  r.read("design_bo_steps", c.utility.bo_steps, 0);
  r.read("entropy_bandwidth", c.utility.entropy_bandwidth);
  r.read("inference_sims", c.inference.total, 2);
  r.read("inference_initial", c.inference.initial, 2);
  r.read("inference_batch", c.inference.batch_size, 1);
  r.read("inference_exploration", c.inference.exploration_weight);
  r.read("inference_lengthscale", c.inference.lengthscale);
  r.read("marginal_draws", c.marginal_draws, 1);
  std::string rule(marginal_rule_name(c.marginal_rule));
  r.read("marginal_rule", rule);
  try {
    c.marginal_rule = parse_marginal_rule(rule);
  } catch (const ConfigError& e) {
    fail(r.child("marginal_rule"), e.what());
  }
  r.read("ado_theta_draws", c.ado_theta, 1);
  r.read("map_bandwidth", c.map_bandwidth);
  r.finish();
  if (c.jitter_scale < 0.0) fail(r.child("jitter_scale"), "must be >= 0");
  if (c.inference.initial > c.inference.total)
    fail(r.child("inference_initial"), "must not exceed inference_sims");
  if (!(c.inference.lengthscale > 0.0)) fail(r.child("inference_lengthscale"), "must be > 0");
  return c;
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  auto& b = cfg.benchmark;
  ObjectReader r(doc, "$");

  if (const json* v = r.get("v"); v && *v != 1) fail("$.v", "unsupported version");

  const json* task = r.get("task");
  if (!task || !task->is_string()) fail("$.task", "expected a task name");
  b.task = task->get<std::string>();
  const Task* t = nullptr;
  try {
    t = &find_task(b.task);
  } catch (const ConfigError& e) {
    fail("$.task", e.what());
  }

  std::string method(method_name(b.method));
  r.read("method", method);
  try {
    b.method = parse_method(method);
    check_method_supported(*t, b.method);
  } catch (const ConfigError& e) {
    fail("$.method", e.what());
  }

  r.read("participants", b.n_participants, 1);
  if (const json* cps = r.get("checkpoints")) {
    if (!cps->is_array() || cps->empty()) fail("$.checkpoints", "expected a nonempty array of trial counts");
    b.checkpoints.clear();
    for (size_t i = 0; i < cps->size(); ++i) {
      const json& c = (*cps)[i];
      if (!c.is_number_integer() || c.get<long long>() < 0)
        fail("$.checkpoints[" + std::to_string(i) + "]", "expected an integer >= 0");
      b.checkpoints.push_back(c.get<int>());
    }
  }
  r.read("seed", b.seed);
  b.threads = default_thread_count();
  r.read("threads", b.threads, 1);
  std::string out = cfg.out_dir.string();
  r.read("out", out);
  cfg.out_dir = out;

  if (const json* budgets = r.get("budgets")) b.engine = engine_from_json(*budgets, "$.budgets");

  if (const json* ev = r.get("evaluation")) {
    ObjectReader er(*ev, "$.evaluation");
    er.read("designs", b.eval_designs, 1);
    er.read("reps", b.eval_reps, 1);
    er.finish();
  }

  if (const json* gt = r.get("ground_truth")) {
    ObjectReader gr(*gt, "$.ground_truth");
    std::string model;
    gr.read("model", model);
    if (!model.empty()) {
      try {
        t->model_index(model);
      } catch (const ConfigError& e) {
        fail("$.ground_truth.model", e.what());
      }
      b.participants.true_model = model;
    }
    if (const json* bounds = gr.get("theta_bounds")) {
      if (!bounds->is_object()) fail("$.ground_truth.theta_bounds", "expected an object");
      for (const auto& [name, range] : bounds->items()) {
        const std::string p = "$.ground_truth.theta_bounds." + name;
        if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
          fail(p, "expected [lower, upper]");
        const double lo = range[0].get<double>();
        const double hi = range[1].get<double>();
        if (!(lo <= hi)) fail(p, "lower bound exceeds upper bound");
        const bool known = std::any_of(t->models.begin(), t->models.end(), [&](const ModelSpec& m) {
          return std::any_of(m.params.begin(), m.params.end(), [&](const ParamDim& d) { return d.name == name; });
        });
        if (!known) fail(p, "no model of task '" + t->name + "' has this parameter");
        b.participants.theta_bounds[name] = {lo, hi};
      }
    }
    gr.finish();
  }
  r.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  const auto& b = cfg.benchmark;
  json j = {{"v", 1},
            {"task", b.task},
            {"method", method_name(b.method)},
            {"participants", b.n_participants},
            {"checkpoints", b.checkpoints},
            {"seed", b.seed},
            {"threads", b.threads},
            {"out", cfg.out_dir.string()},
            {"budgets", engine_to_json(b.engine)},
            {"evaluation", {{"designs", b.eval_designs}, {"reps", b.eval_reps}}}};
  json gt = json::object();
  if (b.participants.true_model) gt["model"] = *b.participants.true_model;
  if (!b.participants.theta_bounds.empty()) {
    json bounds = json::object();
    for (const auto& [name, range] : b.participants.theta_bounds) bounds[name] = {range.first, range.second};
    gt["theta_bounds"] = bounds;
  }
  if (!gt.empty()) j["ground_truth"] = gt;
  return j;
}

}  // namespace bosmos
