#pragma once

#include "bosmos/session.hpp"

#include "json.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace bosmos {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Empty disables authentication; otherwise requests need "Authorization: Bearer <token>".
  std::string token;
  /// Event logs live here as <id>.jsonl and are replayed on startup. Empty keeps sessions in memory.
  std::filesystem::path data_dir;
  EngineConfig engine;
  /// How long next-design waits for a fresh search before answering 202.
  std::chrono::milliseconds proposal_wait{100};
};

/// REST front end for live sessions:
///   POST /sessions, GET /sessions/{id}, GET /sessions/{id}/next-design,
///   POST /sessions/{id}/response, GET /sessions/{id}/posterior, GET /tasks.
/// Payloads carry "v": 1. Writes to one session are serialized; reads return the last
/// published snapshot and never block on a running update.
class SessionServer {
 public:
  explicit SessionServer(ServerConfig cfg);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds the socket; returns the bound port.
  int bind();
  /// Serves until stop(). Call bind() first.
  void run();
  void stop();
  void wait_until_ready() const;
  int port() const { return port_; }
  size_t session_count() const;

 private:
  struct Entry;
  struct Reply {
    int status = 200;
    nlohmann::json body;
    int retry_after_s = 0;
  };

  void install_routes();
  void load_sessions();
  std::shared_ptr<Entry> find(const std::string& id) const;
  Session::EventSink make_sink(const std::shared_ptr<Entry>& e) const;
  void publish(Entry& e);

  Reply create_session(const nlohmann::json& body);
  Reply get_session(const std::string& id) const;
  Reply next_design(const std::string& id);
  Reply submit_response(const std::string& id, const nlohmann::json& body);
  Reply posterior(const std::string& id) const;
  Reply tasks() const;
  nlohmann::json design_payload(const Session& s) const;

  ServerConfig cfg_;
  std::unique_ptr<httplib::Server> http_;
  int port_ = 0;
  mutable std::mutex map_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// 128 random bits as 32 hex characters.
std::string new_session_id();

}  // namespace bosmos
