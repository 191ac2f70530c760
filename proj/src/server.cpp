#include "bosmos/server.hpp"

#include "httplib.h"

#include <fstream>
#include <future>
#include <random>

namespace bosmos {

using nlohmann::json;

struct SessionServer::Entry {
  std::mutex write_mu;
  std::unique_ptr<Session> session;
  std::future<DesignProposal> job;
  std::ofstream log;

  mutable std::mutex snap_mu;
  std::shared_ptr<const json> summary;
  std::shared_ptr<const json> posterior;

  std::shared_ptr<const json> read(std::shared_ptr<const json> Entry::*which) const {
    std::lock_guard lock(snap_mu);
    return this->*which;
  }
};

namespace {

json error_body(std::string_view code, std::string_view message) {
  return {{"v", 1}, {"error", {{"code", code}, {"message", message}}}};
}

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::string new_session_id() {
  std::random_device rd;
  std::uniform_int_distribution<std::uint64_t> dist;
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(dist(rd)),
                static_cast<unsigned long long>(dist(rd)));
  return buf;
}

SessionServer::SessionServer(ServerConfig cfg) : cfg_(std::move(cfg)), http_(std::make_unique<httplib::Server>()) {
  if (!cfg_.data_dir.empty()) {
    std::filesystem::create_directories(cfg_.data_dir);
    load_sessions();
  }
  install_routes();
}

SessionServer::~SessionServer() { stop(); }

int SessionServer::bind() {
  port_ = cfg_.port == 0 ? http_->bind_to_any_port(cfg_.host) : (http_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
  if (port_ < 0) throw std::runtime_error("cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  return port_;
}

void SessionServer::run() { http_->listen_after_bind(); }

void SessionServer::stop() {
  if (http_->is_running()) http_->stop();
}

void SessionServer::wait_until_ready() const { http_->wait_until_ready(); }

size_t SessionServer::session_count() const {
  std::lock_guard lock(map_mu_);
  return sessions_.size();
}

std::shared_ptr<SessionServer::Entry> SessionServer::find(const std::string& id) const {
  std::lock_guard lock(map_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Session::EventSink SessionServer::make_sink(const std::shared_ptr<Entry>& e) const {
  if (cfg_.data_dir.empty()) return {};
  std::ofstream* log = &e->log;  // the entry owns both the session and its log
  return [log](const json& ev) {
    *log << ev.dump() << '\n';
    log->flush();
  };
}

void SessionServer::publish(Entry& e) {
  auto summary = std::make_shared<const json>(e.session->summary());
  auto post = std::make_shared<const json>(e.session->posterior_snapshot());
  std::lock_guard lock(e.snap_mu);
  e.summary = std::move(summary);
  e.posterior = std::move(post);
}

void SessionServer::load_sessions() {
  for (const auto& file : std::filesystem::directory_iterator(cfg_.data_dir)) {
    if (file.path().extension() != ".jsonl") continue;
    const std::string id = file.path().stem().string();
    auto e = std::make_shared<Entry>();
    e->session = std::make_unique<Session>(Session::replay(read_event_log(file.path().string())));
    if (e->session->id() != id) throw ConfigError(file.path().string() + ": session id does not match file name");
    e->log.open(file.path(), std::ios::app);
    e->session->set_sink(make_sink(e));
    publish(*e);
    std::lock_guard lock(map_mu_);
    sessions_[id] = e;
  }
}

json SessionServer::design_payload(const Session& s) const {
  const auto& d = s.pending_design()->design;
  json named = json::object();
  const auto& dims = s.task().design_space.dims();
  for (size_t i = 0; i < dims.size(); ++i) named[dims[i].name] = d[static_cast<Eigen::Index>(i)];
  json hint = s.task().render_hint(d);
  hint["v"] = 1;
  return {{"v", 1},
          {"status", "ready"},
          {"id", s.id()},
          {"trial", s.current_trial()},
          {"design", to_std(d)},
          {"design_named", named},
          {"render_hint", hint}};
}

SessionServer::Reply SessionServer::create_session(const json& body) {
  if (!body.is_object()) return {400, error_body("bad_request", "body must be a JSON object")};
  SessionParams p;
  p.engine = cfg_.engine;
  try {
    p.task = body.at("task").get<std::string>();
    p.method = parse_method(body.value("method", std::string("bosmos")));
    p.budget = body.value("budget", 20);
    if (body.contains("seed"))
      p.seed = body.at("seed").get<std::uint64_t>();
    else
      p.seed = std::random_device{}() | (static_cast<std::uint64_t>(std::random_device{}()) << 32);
  } catch (const json::exception& e) {
    return {400, error_body("bad_request", e.what())};
  } catch (const ConfigError& e) {
    return {400, error_body("bad_request", e.what())};
  }
  try {
    find_task(p.task);
  } catch (const ConfigError& e) {
    return {404, error_body("unknown_task", e.what())};
  }

  const std::string id = new_session_id();
  auto e = std::make_shared<Entry>();
  try {
    // Constructing validates the pairing before anything is written.
    e->session = std::make_unique<Session>(id, p);
  } catch (const ConfigError& err) {
    return {400, error_body("bad_request", err.what())};
  }
  if (!cfg_.data_dir.empty()) {
    e->log.open(cfg_.data_dir / (id + ".jsonl"), std::ios::app);
    e->session = std::make_unique<Session>(id, p, make_sink(e));
  }
  publish(*e);
  {
    std::lock_guard lock(map_mu_);
    sessions_[id] = e;
  }
  return {201, *e->read(&Entry::summary)};
}

SessionServer::Reply SessionServer::get_session(const std::string& id) const {
  auto e = find(id);
  if (!e) return {404, error_body("not_found", "no session " + id)};
  return {200, *e->read(&Entry::summary)};
}

SessionServer::Reply SessionServer::posterior(const std::string& id) const {
  auto e = find(id);
  if (!e) return {404, error_body("not_found", "no session " + id)};
  return {200, *e->read(&Entry::posterior)};
}

SessionServer::Reply SessionServer::next_design(const std::string& id) {
  auto e = find(id);
  if (!e) return {404, error_body("not_found", "no session " + id)};
  std::lock_guard lock(e->write_mu);
  Session& s = *e->session;
  if (s.phase() == Phase::Finished) return {409, error_body("conflict", "session is finished")};
  if (s.phase() == Phase::AwaitingResponse) return {200, design_payload(s)};

  if (!e->job.valid()) {
    const Session* sp = &s;  // the session cannot change while a search is pending
    e->job = std::async(std::launch::async, [sp] { return sp->compute_proposal(); });
  }
  if (e->job.wait_for(cfg_.proposal_wait) != std::future_status::ready)
    return {202, {{"v", 1}, {"status", "pending"}, {"id", id}, {"trial", s.current_trial()}, {"retry_after_ms", 1000}},
            1};
  try {
    s.accept_proposal(e->job.get());
  } catch (const std::exception& err) {
    return {500, error_body("design_failed", err.what())};
  }
  publish(*e);
  return {200, design_payload(s)};
}

SessionServer::Reply SessionServer::submit_response(const std::string& id, const json& body) {
  auto e = find(id);
  if (!e) return {404, error_body("not_found", "no session " + id)};
  if (!body.is_object() || !body.contains("trial") || !body.contains("response"))
    return {400, error_body("bad_request", "body needs \"trial\" and \"response\"")};
  int trial = 0;
  Vector response;
  try {
    trial = body.at("trial").get<int>();
    const json& r = body.at("response");
    const auto values = r.is_array() ? r.get<std::vector<double>>() : std::vector<double>{r.get<double>()};
    response = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  } catch (const json::exception& err) {
    return {400, error_body("bad_request", err.what())};
  }

  std::lock_guard lock(e->write_mu);
  Session& s = *e->session;
  try {
    const DesignProposal proposal = s.pending_design() ? *s.pending_design() : DesignProposal{};
    const auto outcome = s.submit_response(trial, response);
    publish(*e);
    json out = *e->read(&Entry::posterior);
    out["diagnostics"] = trial_diagnostics(outcome, proposal);
    return {200, out};
  } catch (const PhaseConflict& err) {
    return {409, error_body("conflict", err.what())};
  } catch (const InvalidResponse& err) {
    return {400, error_body("invalid_response", err.what())};
  }
}

SessionServer::Reply SessionServer::tasks() const {
  json list = json::array();
  for (const auto& name : task_names()) list.push_back(find_task(name).describe());
  return {200, {{"v", 1}, {"tasks", list}}};
}

void SessionServer::install_routes() {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    if (r.retry_after_s > 0) res.set_header("Retry-After", std::to_string(r.retry_after_s));
    res.set_content(r.body.dump(), "application/json");
  };
  // Parses a request body; empty bodies count as {}.
  auto parse = [](const httplib::Request& req, json& out) -> std::optional<Reply> {
    if (req.body.empty()) {
      out = json::object();
      return std::nullopt;
    }
    try {
      out = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return Reply{400, error_body("bad_request", std::string("invalid JSON: ") + e.what())};
    }
    if (out.is_object() && out.contains("v") && out["v"] != 1)
      return Reply{400, error_body("unsupported_version", "only \"v\": 1 is supported")};
    return std::nullopt;
  };

  http_->set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (cfg_.token.empty() || req.get_header_value("Authorization") == "Bearer " + cfg_.token)
      return httplib::Server::HandlerResponse::Unhandled;
    res.status = 401;
    res.set_content(error_body("unauthorized", "missing or invalid bearer token").dump(), "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });
  http_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(error_body("internal", what).dump(), "application/json");
  });

  // Unmatched routes get a JSON body like every other error.
  http_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(error_body("not_found", "no such route").dump(), "application/json");
  });

  http_->Get("/tasks", [this, send](const httplib::Request&, httplib::Response& res) { send(res, tasks()); });
  http_->Post("/sessions", [this, send, parse](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (auto err = parse(req, body)) return send(res, *err);
    send(res, create_session(body));
  });
  http_->Get(R"(/sessions/([0-9a-f]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_session(req.matches[1]));
  });
  http_->Get(R"(/sessions/([0-9a-f]+)/next-design)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, next_design(req.matches[1]));
  });
  http_->Post(R"(/sessions/([0-9a-f]+)/response)",
              [this, send, parse](const httplib::Request& req, httplib::Response& res) {
                json body;
                if (auto err = parse(req, body)) return send(res, *err);
                send(res, submit_response(req.matches[1], body));
              });
  http_->Get(R"(/sessions/([0-9a-f]+)/posterior)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, posterior(req.matches[1]));
  });
}

}  // namespace bosmos
