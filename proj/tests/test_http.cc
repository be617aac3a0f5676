// Copyright 2026 The Prefloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "prefloop/api.h"
#include "prefloop/error.h"
#include "prefloop/http_backends.h"
#include "prefloop/http_server.h"
#include "prefloop/session.h"
#include "test_support.h"

using namespace prefloop;
using namespace prefloop::testing;
using nlohmann::json;

namespace {

// Runs an httplib server on a free loopback port for the test's lifetime.
class LocalServer {
 public:
  explicit LocalServer(httplib::Server& server) : server_(server) {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server& server_;
  int port_ = 0;
  std::thread thread_;
};

class RunningApi {
 public:
  RunningApi() : manager_(shared_default_repository(), std::make_shared<MemorySessionStore>(),
                          mock_backend_factory(shared_default_repository())),
                 server_(manager_) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.run(); });
  }
  ~RunningApi() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(std::chrono::seconds(20));
    return c;
  }

 private:
  SessionManager manager_;
  ApiServer server_;
  int port_ = 0;
  std::thread thread_;
};

json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

// Fake generation and extraction services. Generation sleeps longer for
// earlier prompts so that replies complete out of order.
struct FakeModels {
  httplib::Server server;
  std::mutex mutex;
  std::vector<uint64_t> seeds;
  std::vector<std::string> auth;
  std::atomic<int> failures_left{0};
  std::atomic<int> extract_calls{0};
  std::atomic<int> anonymous{0};

  FakeModels() {
    server.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      if (failures_left.fetch_sub(1) > 0) {
        res.status = 503;
        return;
      }
      const json in = json::parse(req.body);
      const std::string prompt = in.at("positive_prompt");
      const auto tail = prompt.rfind("number ");
      int idx = 0;
      if (tail != std::string::npos) {
        idx = std::stoi(prompt.substr(tail + 7));
        std::this_thread::sleep_for(std::chrono::milliseconds(20 * (5 - idx)));
      } else {
        idx = 100 + anonymous++;
      }
      {
        std::lock_guard lock(mutex);
        seeds.push_back(in.at("seed").get<uint64_t>());
        auth.push_back(req.get_header_value("X-Api-Key"));
      }
      res.set_content(json{{"image_id", "gen-" + std::to_string(idx)},
                           {"uri", "https://images.test/" + std::to_string(idx)}}
                          .dump(),
                      "application/json");
    });
    server.Post("/v1/extract", [this](const httplib::Request& req, httplib::Response& res) {
      ++extract_calls;
      const json in = json::parse(req.body);
      const std::string uri = in.at("uri");
      if (in.at("instructions").get<std::string>().find("brightness") == std::string::npos) {
        res.status = 400;
        return;
      }
      ImageFeatureProfile p = make_profile(default_repository(), "ignored");
      p.discrete_values["subject_type"] = uri.back() == '1' ? "animal" : "person";
      res.set_content("Sure! " + profile_to_extraction_json(p).dump(), "text/plain");
    });
    server.Post("/v1/broken/extract", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("I cannot see the image.", "text/plain");
    });
  }
};

std::vector<PromptSpec> numbered_prompts(int n) {
  std::vector<PromptSpec> out;
  for (int i = 0; i < n; ++i) {
    PromptSpec p;
    p.id = "p" + std::to_string(i);
    p.positive_prompt = "a kite number " + std::to_string(i);
    out.push_back(p);
  }
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kParseError;
}

}  // namespace

TEST_SUITE("http_api") {
  TEST_CASE("status mapping") {
    CHECK(http_status_for(ErrorCode::kNotFound) == 404);
    CHECK(http_status_for(ErrorCode::kWrongPhase) == 409);
    CHECK(http_status_for(ErrorCode::kRoundLimitReached) == 409);
    CHECK(http_status_for(ErrorCode::kUnknownImage) == 400);
    CHECK(http_status_for(ErrorCode::kConfigError) == 400);
    CHECK(http_status_for(ErrorCode::kBackendUnreachable) == 502);
    CHECK(http_status_for(ErrorCode::kStoreError) == 500);
  }

  TEST_CASE("session routes over HTTP") {
    RunningApi api;
    auto c = api.client();
    auto r = c.Post("/sessions", R"({"config": {"initial_prompt": "a fox in snow", "seed": 3,
                                   "max_rounds": 1}})",
                    "application/json");
    REQUIRE(r);
    CHECK(r->status == 201);
    json created = json::parse(r->body);
    const std::string id = created["session_id"];
    CHECK(created["candidates"].size() == 4);
    CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");

    r = c.Get("/sessions/" + id);
    CHECK(r->status == 200);
    CHECK(body_of(r)["phase"] == "awaiting_feedback");

    r = c.Post("/sessions/" + id + "/regenerate", "", "application/json");
    CHECK(r->status == 200);
    const json regen = body_of(r);
    CHECK(regen["candidates"][0]["image_id"] != created["candidates"][0]["image_id"]);

    json marks = json::object();
    marks[regen["candidates"][0]["image_id"].get<std::string>()] = "liked";
    marks[regen["candidates"][1]["image_id"].get<std::string>()] = "disliked";
    r = c.Post("/sessions/" + id + "/feedback", json{{"annotations", marks}}.dump(),
               "application/json");
    CHECK(r->status == 200);
    CHECK(body_of(r)["phase"] == "generating");

    r = c.Post("/sessions/" + id + "/feedback", json{{"annotations", marks}}.dump(),
               "application/json");
    CHECK(r->status == 409);
    CHECK(body_of(r)["error"]["code"] == "WrongPhase");

    r = c.Get("/sessions/" + id + "/preferences");
    CHECK(r->status == 200);
    CHECK(body_of(r)["rounds_ingested"] == 1);

    r = c.Post("/sessions/" + id + "/next", "", "application/json");
    CHECK(r->status == 409);
    CHECK(body_of(r)["error"]["code"] == "RoundLimitReached");
    CHECK(body_of(c.Get("/sessions/" + id))["phase"] == "closed");

    r = c.Delete("/sessions/" + id);
    CHECK(r->status == 200);
    CHECK(body_of(r)["phase"] == "closed");
  }

  TEST_CASE("error statuses") {
    RunningApi api;
    auto c = api.client();
    auto r = c.Get("/sessions/s-0000000000000000");
    CHECK(r->status == 404);
    CHECK(body_of(r)["error"]["code"] == "NotFound");
    r = c.Post("/sessions", "{broken", "application/json");
    CHECK(r->status == 400);
    r = c.Post("/sessions", R"({"initial_prompt": "x", "candidates_per_round": 1})",
               "application/json");
    CHECK(r->status == 400);
    CHECK(body_of(r)["error"]["code"] == "ConfigError");
    r = c.Get("/nowhere");
    CHECK(r->status == 404);
    r = c.Delete("/sessions");
    CHECK(r->status == 405);

    r = c.Post("/sessions", R"({"initial_prompt": "a fox"})", "application/json");
    const std::string id = body_of(r)["session_id"];
    r = c.Post("/sessions/" + id + "/feedback", R"({"annotations": {"img-x": "liked"}})",
               "application/json");
    CHECK(r->status == 400);
    CHECK(body_of(r)["error"]["code"] == "UnknownImage");
    r = c.Post("/sessions/" + id + "/feedback", R"({"annotations": {"img-x": "adored"}})",
               "application/json");
    CHECK(r->status == 400);
  }

  TEST_CASE("in-process handler matches the route table") {
    SessionManager m(shared_default_repository(), std::make_shared<MemorySessionStore>(),
                     mock_backend_factory(shared_default_repository()));
    const ApiResponse created =
        handle_api_request(m, "POST", "/sessions", R"({"initial_prompt": "a fox"})");
    REQUIRE(created.status == 201);
    const std::string id = created.body["session_id"];
    for (const auto& route : api_routes()) {
      std::string path(route.path);
      const auto at = path.find("{id}");
      if (at != std::string::npos) path.replace(at, 4, id);
      const ApiResponse res = handle_api_request(m, route.method, path, "{}");
      CAPTURE(path);
      CHECK(res.status != 404);
      CHECK(res.status != 405);
    }
  }

  TEST_CASE("http backends keep order and forward credentials") {
    FakeModels models;
    LocalServer server(models.server);
    ::setenv("PREFLOOP_TEST_TOKEN", "sesame", 1);
    BackendConfig cfg;
    cfg.kind = BackendKind::kHttp;
    cfg.generation_url = server.url() + "/v1/";
    cfg.extraction_url = server.url() + "/v1";
    cfg.auth_header = "X-Api-Key";
    cfg.auth_token_env = "PREFLOOP_TEST_TOKEN";
    cfg.timeout_ms = 5000;
    Backends b = make_http_backends(cfg, shared_default_repository());

    const auto prompts = numbered_prompts(5);
    const auto images = b.generation->generate(prompts, 99);
    REQUIRE(images.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(images[i].id == "gen-" + std::to_string(i));
      CHECK(images[i].prompt_id == prompts[i].id);
    }
    for (const auto& a : models.auth) CHECK(a == "sesame");
    std::vector<uint64_t> expected;
    for (uint64_t i = 0; i < 5; ++i) expected.push_back(derive_seed(99, {i}));
    std::sort(expected.begin(), expected.end());
    std::sort(models.seeds.begin(), models.seeds.end());
    CHECK(models.seeds == expected);

    const auto profiles = b.extraction->extract(images);
    REQUIRE(profiles.size() == 5);
    CHECK(profiles[1].image_id == "gen-1");
    CHECK(profiles[1].discrete_values.at("subject_type") == "animal");
    CHECK(profiles[2].discrete_values.at("subject_type") == "person");

    // No completion service configured: assembly falls back to the template.
    CHECK_FALSE(b.completion->complete("anything").empty());
  }

  TEST_CASE("http backend failures") {
    FakeModels models;
    LocalServer server(models.server);
    BackendConfig cfg;
    cfg.kind = BackendKind::kHttp;
    cfg.generation_url = server.url() + "/v1";
    cfg.extraction_url = server.url() + "/v1/broken";
    cfg.timeout_ms = 2000;
    cfg.retries = 1;

    models.failures_left = 1;
    Backends b = make_http_backends(cfg, shared_default_repository());
    CHECK(b.generation->generate(numbered_prompts(1), 1).size() == 1);

    models.failures_left = 2;
    CHECK(code_of([&] { b.generation->generate(numbered_prompts(1), 1); }) ==
          ErrorCode::kBackendUnreachable);

    models.failures_left = 0;
    const auto images = b.generation->generate(numbered_prompts(2), 1);
    CHECK(code_of([&] { b.extraction->extract(images); }) == ErrorCode::kExtractionFormatError);

    BackendConfig dead = cfg;
    dead.generation_url = "http://127.0.0.1:1";
    dead.retries = 0;
    dead.timeout_ms = 500;
    Backends d = make_http_backends(dead, shared_default_repository());
    CHECK(code_of([&] { d.generation->generate(numbered_prompts(1), 1); }) ==
          ErrorCode::kBackendUnreachable);
  }

  TEST_CASE("sessions run end to end on http backends") {
    FakeModels models;
    LocalServer server(models.server);
    auto repo = shared_default_repository();
    SessionManager m(repo, std::make_shared<MemorySessionStore>(), default_backend_factory(repo));
    SessionConfig cfg;
    cfg.initial_prompt = "a red kite";
    cfg.candidates_per_round = 3;
    cfg.backend.kind = BackendKind::kHttp;
    cfg.backend.generation_url = server.url() + "/v1";
    cfg.backend.extraction_url = server.url() + "/v1";
    SessionRecord s = m.create(cfg);
    REQUIRE(s.current_candidates.size() == 3);
    CHECK(models.extract_calls == 3);
    std::map<std::string, Annotation> marks;
    for (const auto& c : s.current_candidates) {
      marks[c.image.id] = c.profile.discrete_values.at("subject_type") == "animal"
                              ? Annotation::kLiked
                              : Annotation::kDisliked;
    }
    m.submit_feedback(s.session_id, marks);
    s = m.advance(s.session_id);
    CHECK(s.current_candidates.size() == 3);
    CHECK(s.current_candidates[0].image.uri.rfind("https://images.test/", 0) == 0);
  }
}
