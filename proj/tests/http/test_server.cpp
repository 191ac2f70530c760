#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "bosmos/server.hpp"

#include "httplib.h"

#include <atomic>
#include <filesystem>
#include <thread>

using namespace bosmos;
using nlohmann::json;

namespace {

ServerConfig quick_config() {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.engine.n_particles = 400;
  return cfg;
}

/// A server listening on a free port for the lifetime of the object.
struct Running {
  SessionServer server;
  std::thread thread;
  httplib::Client client;

  explicit Running(ServerConfig cfg) : server(std::move(cfg)), client("127.0.0.1", server.bind()) {
    thread = std::thread([this] { server.run(); });
    server.wait_until_ready();
    client.set_read_timeout(120, 0);
  }
  ~Running() {
    server.stop();
    thread.join();
  }
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

json create(httplib::Client& c, const json& body, int expect = 201) {
  auto r = c.Post("/sessions", body.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == expect);
  return json::parse(r->body);
}

/// Polls next-design until the search finishes, counting the pending replies.
json poll_design(httplib::Client& c, const std::string& id, int* pending = nullptr) {
  for (int i = 0; i < 600; ++i) {
    auto r = c.Get("/sessions/" + id + "/next-design");
    REQUIRE(r);
    const json j = json::parse(r->body);
    CHECK(j["v"] == 1);
    if (r->status == 200) return j;
    REQUIRE(r->status == 202);
    CHECK(j["status"] == "pending");
    CHECK(r->get_header_value("Retry-After") == "1");
    if (pending) ++*pending;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  FAIL("design never became ready");
  return {};
}

httplib::Result respond(httplib::Client& c, const std::string& id, const json& body) {
  return c.Post("/sessions/" + id + "/response", body.dump(), "application/json");
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bosmos_http_" + name + "_" + new_session_id().substr(0, 8));
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("http") {

TEST_CASE("GET /tasks lists the registry") {
  Running srv(quick_config());
  auto r = srv.client.Get("/tasks");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "application/json");
  const json j = json::parse(r->body);
  CHECK(j["v"] == 1);
  REQUIRE(j["tasks"].size() == 4);
  std::set<std::string> names;
  for (const auto& t : j["tasks"]) names.insert(t["name"].get<std::string>());
  CHECK(names == std::set<std::string>{"demo", "memory", "risky", "sigdet"});
}

TEST_CASE("a full risky-choice session over HTTP") {
  Running srv(quick_config());
  auto& c = srv.client;
  const json created = create(c, {{"v", 1}, {"task", "risky"}, {"method", "random"}, {"budget", 2}, {"seed", 3}});
  CHECK(created["v"] == 1);
  CHECK(created["phase"] == "proposing");
  CHECK(created["budget_remaining"] == 2);
  const std::string id = created["id"];
  CHECK(id.size() == 32);

  const json got = body_of(c.Get("/sessions/" + id));
  CHECK(got["id"] == id);
  for (const auto& [name, p] : got["model_marginals"].items()) CHECK(std::abs(p.get<double>() - 0.25) < 0.06);

  for (int t = 1; t <= 2; ++t) {
    const json d = poll_design(c, id);
    CHECK(d["status"] == "ready");
    CHECK(d["trial"] == t);
    CHECK(d["design"].size() == 4);
    CHECK(d["design_named"].contains("d_plA"));
    const json& hint = d["render_hint"];
    CHECK(hint["v"] == 1);
    CHECK(hint["kind"] == "risky");
    for (const char* card : {"lottery_a", "lottery_b"}) {
      const json& l = hint[card];
      CHECK(l["p_low"].get<double>() + l["p_mid"].get<double>() + l["p_high"].get<double>() ==
            doctest::Approx(1.0).epsilon(1e-9));
    }
    // Idempotent until answered.
    CHECK(poll_design(c, id)["design"] == d["design"]);
    CHECK(body_of(c.Get("/sessions/" + id))["phase"] == "awaiting_response");

    auto r = respond(c, id, {{"v", 1}, {"trial", t}, {"response", 1}});
    REQUIRE(r);
    CHECK(r->status == 200);
    const json post = json::parse(r->body);
    CHECK(post["v"] == 1);
    CHECK(post["trial"] == t);
    CHECK(post["history"].size() == static_cast<size_t>(t));
    CHECK(post["diagnostics"]["v"] == 1);
    CHECK(post["diagnostics"]["trial"] == t);

    auto dup = respond(c, id, {{"trial", t}, {"response", 0}});
    REQUIRE(dup);
    CHECK(dup->status == 409);
    CHECK(json::parse(dup->body)["error"]["code"] == "conflict");
  }
  const json done = body_of(c.Get("/sessions/" + id));
  CHECK(done["phase"] == "finished");
  CHECK(done.contains("map"));
  auto after = c.Get("/sessions/" + id + "/next-design");
  REQUIRE(after);
  CHECK(after->status == 409);
  const json post = body_of(c.Get("/sessions/" + id + "/posterior"));
  CHECK(post["v"] == 1);
  CHECK(post["models"].size() == 4);
  CHECK(post.contains("map"));
}

TEST_CASE("request errors") {
  Running srv(quick_config());
  auto& c = srv.client;
  create(c, {{"task", "stroop"}}, 404);
  create(c, {{"task", "demo"}, {"method", "minebed"}}, 400);
  create(c, {{"task", "sigdet"}, {"method", "ado"}}, 400);
  create(c, {{"task", "demo"}, {"budget", 0}}, 400);
  create(c, {{"v", 2}, {"task", "demo"}}, 400);
  create(c, {{"budget", 3}}, 400);
  auto bad = c.Post("/sessions", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  for (const std::string path : {"/sessions/0123abcd", "/sessions/0123abcd/next-design", "/sessions/0123abcd/posterior",
                                 "/sessions/xyz", "/nothing"}) {
    auto r = c.Get(path);
    REQUIRE(r);
    CHECK(r->status == 404);
    CHECK(json::parse(r->body)["v"] == 1);
  }

  const std::string id = create(c, {{"task", "memory"}, {"method", "lbird"}, {"budget", 3}, {"seed", 1}})["id"];
  auto early = respond(c, id, {{"trial", 1}, {"response", 1}});
  REQUIRE(early);
  CHECK(early->status == 409);
  poll_design(c, id);
  const json before = body_of(c.Get("/sessions/" + id + "/posterior"));
  for (const json& body : {json{{"trial", 1}, {"response", 0.5}}, json{{"trial", 1}, {"response", "yes"}},
                           json{{"response", 1}}, json{{"trial", 1}, {"response", {1, 0}}}}) {
    auto r = respond(c, id, body);
    REQUIRE(r);
    CHECK(r->status == 400);
  }
  auto version = respond(c, id, {{"v", 7}, {"trial", 1}, {"response", 1}});
  REQUIRE(version);
  CHECK(version->status == 400);
  CHECK(json::parse(version->body)["error"]["code"] == "unsupported_version");
  auto wrong_trial = respond(c, id, {{"trial", 2}, {"response", 1}});
  REQUIRE(wrong_trial);
  CHECK(wrong_trial->status == 409);
  CHECK(body_of(c.Get("/sessions/" + id + "/posterior")) == before);
}

TEST_CASE("slow design searches answer 202 and are polled") {
  auto cfg = quick_config();
  cfg.proposal_wait = std::chrono::milliseconds(0);
  Running srv(cfg);
  const std::string id = create(srv.client, {{"task", "demo"}, {"method", "bosmos"}, {"budget", 2}, {"seed", 4}})["id"];
  auto first = srv.client.Get("/sessions/" + id + "/next-design");
  REQUIRE(first);
  CHECK(first->status == 202);
  CHECK(json::parse(first->body)["retry_after_ms"] == 1000);
  // A response while the search is still running is a conflict.
  auto r = respond(srv.client, id, {{"trial", 1}, {"response", 0.0}});
  REQUIRE(r);
  CHECK(r->status == 409);
  const json d = poll_design(srv.client, id);
  CHECK(d["trial"] == 1);
  CHECK(d["render_hint"]["kind"] == "demo");
}

TEST_CASE("bearer token") {
  auto cfg = quick_config();
  cfg.token = "s3cret";
  Running srv(cfg);
  auto anon = srv.client.Get("/tasks");
  REQUIRE(anon);
  CHECK(anon->status == 401);
  CHECK(json::parse(anon->body)["error"]["code"] == "unauthorized");
  auto wrong = srv.client.Get("/tasks", {{"Authorization", "Bearer nope"}});
  REQUIRE(wrong);
  CHECK(wrong->status == 401);
  srv.client.set_bearer_token_auth("s3cret");
  auto ok = srv.client.Get("/tasks");
  REQUIRE(ok);
  CHECK(ok->status == 200);
}

TEST_CASE("sessions survive a restart through their event logs") {
  const auto dir = fresh_dir("restart");
  auto cfg = quick_config();
  cfg.data_dir = dir;
  std::string id;
  json snapshot, design2;
  {
    Running srv(cfg);
    id = create(srv.client, {{"task", "memory"}, {"method", "ado"}, {"budget", 3}, {"seed", 8}})["id"];
    poll_design(srv.client, id);
    REQUIRE(respond(srv.client, id, {{"trial", 1}, {"response", 1}})->status == 200);
    design2 = poll_design(srv.client, id);
    snapshot = body_of(srv.client.Get("/sessions/" + id + "/posterior"));
  }
  CHECK(std::filesystem::exists(dir / (id + ".jsonl")));
  {
    Running srv(cfg);
    CHECK(srv.server.session_count() == 1);
    CHECK(body_of(srv.client.Get("/sessions/" + id + "/posterior")) == snapshot);
    CHECK(poll_design(srv.client, id)["design"] == design2["design"]);
    auto r = respond(srv.client, id, {{"trial", 2}, {"response", 0}});
    REQUIRE(r);
    CHECK(r->status == 200);
  }
  {
    Running srv(cfg);
    CHECK(body_of(srv.client.Get("/sessions/" + id))["trials_completed"] == 2);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("reads are served while an update runs") {
  Running srv(quick_config());
  auto& c = srv.client;
  const std::string id = create(c, {{"task", "demo"}, {"method", "bosmos"}, {"budget", 2}, {"seed", 5}})["id"];
  poll_design(c, id);
  std::atomic<bool> done{false};
  std::atomic<int> reads{0}, failures{0};
  std::thread writer([&] {
    httplib::Client w("127.0.0.1", srv.server.port());
    w.set_read_timeout(120, 0);
    auto r = respond(w, id, {{"trial", 1}, {"response", 1.5}});
    if (!r || r->status != 200) ++failures;
    done = true;
  });
  std::vector<std::thread> readers;
  for (int k = 0; k < 3; ++k)
    readers.emplace_back([&] {
      httplib::Client rc("127.0.0.1", srv.server.port());
      while (!done) {
        auto r = rc.Get("/sessions/" + id + "/posterior");
        if (!r || r->status != 200 || json::parse(r->body)["v"] != 1) ++failures;
        ++reads;
      }
    });
  writer.join();
  for (auto& t : readers) t.join();
  CHECK(failures == 0);
  CHECK(reads > 0);
  CHECK(body_of(c.Get("/sessions/" + id + "/posterior"))["trial"] == 1);
}

}  // TEST_SUITE
