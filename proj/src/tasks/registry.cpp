#include "bosmos/tasks.hpp"

#include <algorithm>
#include <map>

namespace bosmos {

int Task::model_index(std::string_view model_name) const {
  for (int k = 0; k < num_models(); ++k)
    if (models[k].id.name == model_name) return k;
  throw ConfigError("task '" + name + "' has no model '" + std::string(model_name) + "'");
}

bool Task::has_exact_likelihoods() const {
  return std::all_of(models.begin(), models.end(), [](const ModelSpec& m) { return m.log_likelihood.has_value(); });
}

bool Task::has_finite_responses() const {
  return std::all_of(models.begin(), models.end(), [](const ModelSpec& m) { return m.response_support.has_value(); });
}

nlohmann::json Task::describe() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : models) {
    nlohmann::json ps = nlohmann::json::array();
    for (const auto& p : m.params) {
      nlohmann::json prior = {{"kind", p.prior.kind == Prior::Kind::Beta ? "beta" : "uniform"}};
      if (p.prior.kind == Prior::Kind::Beta) {
        prior["a"] = p.prior.a;
        prior["b"] = p.prior.b;
      }
      ps.push_back({{"name", p.name}, {"lower", p.lower}, {"upper", p.upper}, {"prior", prior}});
    }
    ms.push_back({{"name", m.id.name}, {"params", ps}, {"exact_likelihood", m.log_likelihood.has_value()}});
  }
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : design_space.dims())
    ds.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}, {"integer", d.integer}});
  return {{"name", name},
          {"models", ms},
          {"design_space", ds},
          {"model_prior", std::vector<double>(model_prior.data(), model_prior.data() + model_prior.size())}};
}

namespace {

const std::map<std::string, Task, std::less<>>& registry() {
  static const std::map<std::string, Task, std::less<>> tasks = [] {
    std::map<std::string, Task, std::less<>> m;
    for (Task t : {make_demo_task(), make_memory_task(), make_sigdet_task(), make_risky_task()}) {
      auto key = t.name;
      m.emplace(std::move(key), std::move(t));
    }
    return m;
  }();
  return tasks;
}

}  // namespace

const Task& find_task(std::string_view name) {
  const auto& r = registry();
  auto it = r.find(name);
  if (it == r.end()) throw ConfigError("unknown task '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> task_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

}  // namespace bosmos
