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
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "prefloop/error.h"
#include "prefloop/session.h"
#include "test_support.h"

using namespace prefloop;
using namespace prefloop::testing;
using nlohmann::json;

namespace {

SessionConfig base_config(uint64_t seed = 7) {
  SessionConfig cfg;
  cfg.initial_prompt = "a lighthouse on a cliff";
  cfg.seed = seed;
  return cfg;
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

std::map<std::string, Annotation> alternate(const SessionRecord& s) {
  std::map<std::string, Annotation> out;
  for (std::size_t i = 0; i < s.current_candidates.size(); ++i) {
    out[s.current_candidates[i].image.id] = i % 2 ? Annotation::kDisliked : Annotation::kLiked;
  }
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("prefloop-test-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("session_service") {
  TEST_CASE("create generates round zero") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionRecord s = create_session("s1", base_config(), repo, backends);
    CHECK(s.phase == Phase::kAwaitingFeedback);
    REQUIRE(s.current_candidates.size() == 4);
    std::set<std::string> prompt_ids;
    std::set<std::string> image_ids;
    for (const auto& c : s.current_candidates) {
      prompt_ids.insert(c.prompt.id);
      image_ids.insert(c.image.id);
      CHECK(c.profile.image_id == c.image.id);
      CHECK(c.prompt.bundle.ordinal_choices.empty());
      CHECK(satisfies_hard_constraint(s.config.initial_prompt, c.prompt.positive_prompt));
    }
    CHECK(prompt_ids.size() == 4);
    CHECK(image_ids.size() == 4);
    CHECK(s.state == PreferenceState(repo));

    SessionRecord again = create_session("s1", base_config(), repo, backends);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(again.current_candidates[i].profile == s.current_candidates[i].profile);
    }
  }

  TEST_CASE("config validation") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionConfig one = base_config();
    one.candidates_per_round = 1;
    CHECK(code_of([&] { create_session("x", one, repo, backends); }) == ErrorCode::kConfigError);
    SessionConfig blank = base_config();
    blank.initial_prompt = "  ";
    CHECK(code_of([&] { create_session("x", blank, repo, backends); }) == ErrorCode::kConfigError);

    SessionConfig cfg = base_config();
    cfg.assembly = AssemblyMode::kVlm;
    cfg.sampling.exploration_floor = 0.5;
    cfg.engine.round_variance = RoundVarianceMode::kAllSamples;
    cfg.backend.p_noise = 0.0;
    CHECK(session_config_from_json(json::parse(session_config_to_json(cfg).dump())) == cfg);
    CHECK(code_of([] { session_config_from_json(json{{"initial_prompt", "x"}, {"assembly", "magic"}}); }) ==
          ErrorCode::kConfigError);
  }

  TEST_CASE("regenerate replaces candidates without touching statistics") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionRecord s = create_session("s", base_config(), repo, backends);
    const auto first = s.current_candidates;
    regenerate_candidates(s, repo, backends);
    const auto second = s.current_candidates;
    regenerate_candidates(s, repo, backends);
    CHECK(s.state == PreferenceState(repo));
    CHECK(s.rounds.empty());
    CHECK(first[0].prompt.bundle.rng_seed != second[0].prompt.bundle.rng_seed);
    CHECK(second[0].prompt.bundle.rng_seed != s.current_candidates[0].prompt.bundle.rng_seed);
    CHECK_FALSE(first[0].prompt.bundle == second[0].prompt.bundle);
    CHECK(first[0].image.id != second[0].image.id);

    submit_feedback(s, alternate(s), repo);
    CHECK(code_of([&] { regenerate_candidates(s, repo, backends); }) == ErrorCode::kWrongPhase);
  }

  TEST_CASE("feedback") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionRecord s = create_session("s", base_config(), repo, backends);
    std::map<std::string, Annotation> foreign{{"img-nope", Annotation::kLiked}};
    const SessionRecord before = s;
    CHECK(code_of([&] { submit_feedback(s, foreign, repo); }) == ErrorCode::kUnknownImage);
    CHECK(session_to_json(s) == session_to_json(before));

    submit_feedback(s, alternate(s), repo);
    CHECK(s.phase == Phase::kGenerating);
    CHECK(s.state.rounds_ingested() == 1);
    REQUIRE(s.rounds.size() == 1);
    CHECK(s.rounds[0].round_index == 1);
    CHECK(s.rounds[0].entries.size() == 4);
    CHECK(code_of([&] { submit_feedback(s, alternate(s), repo); }) == ErrorCode::kWrongPhase);

    advance_round(s, repo, backends);
    const PreferenceState state_before = s.state;
    submit_feedback(s, {}, repo);
    CHECK(s.rounds.size() == 2);
    CHECK(s.rounds[1].count(Annotation::kUnlabeled) == 4);
    CHECK(s.state == state_before);
  }

  TEST_CASE("advance and the round limit") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionConfig cfg = base_config();
    cfg.max_rounds = 2;
    SessionRecord s = create_session("s", cfg, repo, backends);
    CHECK(code_of([&] { advance_round(s, repo, backends); }) == ErrorCode::kWrongPhase);
    submit_feedback(s, alternate(s), repo);
    const PreferenceState state = s.state;
    advance_round(s, repo, backends);
    CHECK(s.state == state);
    CHECK(s.phase == Phase::kAwaitingFeedback);
    submit_feedback(s, alternate(s), repo);
    CHECK(code_of([&] { advance_round(s, repo, backends); }) == ErrorCode::kRoundLimitReached);
    CHECK(s.phase == Phase::kClosed);
    CHECK(code_of([&] { submit_feedback(s, {}, repo); }) == ErrorCode::kWrongPhase);
  }

  TEST_CASE("same history and seed give identical next rounds") {
    const FeatureRepository& repo = default_repository();
    Backends b1 = make_mock_backends(shared_default_repository(), 0.15);
    Backends b2 = make_mock_backends(shared_default_repository(), 0.15);
    SessionRecord x = create_session("s", base_config(3), repo, b1);
    SessionRecord y = create_session("s", base_config(3), repo, b2);
    for (int r = 0; r < 3; ++r) {
      submit_feedback(x, alternate(x), repo);
      submit_feedback(y, alternate(y), repo);
      advance_round(x, repo, b1);
      advance_round(y, repo, b2);
      CHECK(session_to_json(x) == session_to_json(y));
    }
  }

  TEST_CASE("next round follows the roulette probabilities") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionConfig cfg = base_config();
    cfg.candidates_per_round = 400;
    SessionRecord s = create_session("s", cfg, repo, backends);
    submit_feedback(s, {}, repo);
    json state = s.state.to_json();
    state["odds"]["lighting_type"]["dramatic"] = {20.0, 1.0, 1.0, 1.0, 1};
    state["odds"]["lighting_type"]["natural"] = {4.0, 1.0, 1.0, 1.0, 1};
    s.state = PreferenceState::from_json(state, repo);

    double total = 0.0;
    for (const auto& v : repo.at("lighting_type").values) {
      total += s.state.cumulative_odds_ratio("lighting_type", v);
    }
    const double p = 20.0 / total;
    int hits = 0;
    int n = 0;
    for (int r = 0; r < 10; ++r) {
      if (r > 0) submit_feedback(s, {}, repo);
      advance_round(s, repo, backends);
      for (const auto& c : s.current_candidates) {
        hits += c.prompt.bundle.discrete_choices.at("lighting_type") == "dramatic";
        ++n;
      }
    }
    CHECK(p == doctest::Approx(20.0 / 27.0));
    CHECK(std::abs(hits / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  }

  TEST_CASE("property: phase machine") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      SessionConfig cfg = base_config(trial);
      cfg.max_rounds = 3;
      SessionRecord s = create_session("s", cfg, repo, backends);
      for (int step = 0; step < 30; ++step) {
        const Phase before = s.phase;
        const std::size_t rounds = s.rounds.size();
        const PreferenceState state = s.state;
        const int op = static_cast<int>(rng.index(5));
        try {
          switch (op) {
            case 0:
              regenerate_candidates(s, repo, backends);
              CHECK(before == Phase::kAwaitingFeedback);
              CHECK(s.phase == Phase::kAwaitingFeedback);
              break;
            case 1:
              submit_feedback(s, alternate(s), repo);
              CHECK(before == Phase::kAwaitingFeedback);
              CHECK(s.phase == Phase::kGenerating);
              CHECK(s.rounds.size() == rounds + 1);
              break;
            case 2:
            case 3:
              advance_round(s, repo, backends);
              CHECK(before == Phase::kGenerating);
              CHECK(s.phase == Phase::kAwaitingFeedback);
              break;
            case 4:
              if (rng.uniform() < 0.2) {
                close_session(s);
                CHECK(s.phase == Phase::kClosed);
              }
              break;
          }
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kRoundLimitReached) {
            CHECK(before == Phase::kGenerating);
            CHECK(s.phase == Phase::kClosed);
          } else {
            CHECK(e.code() == ErrorCode::kWrongPhase);
            CHECK(s.phase == before);
          }
        }
        if (op != 1) CHECK(s.state == state);
        if (s.phase == Phase::kAwaitingFeedback) CHECK_FALSE(s.current_candidates.empty());
      }
    }
  }

  TEST_CASE("persistence round trip and replay") {
    const FeatureRepository& repo = default_repository();
    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionRecord s = create_session("s-roundtrip", base_config(), repo, backends);
    for (int r = 0; r < 4; ++r) {
      submit_feedback(s, alternate(s), repo);
      advance_round(s, repo, backends);
    }
    DirectorySessionStore store(temp_dir("roundtrip"));
    store.save(s);
    CHECK(store.contains("s-roundtrip"));
    CHECK(store.list() == std::vector<std::string>{"s-roundtrip"});
    const SessionRecord back = store.load("s-roundtrip", repo);
    CHECK(session_to_json(back) == session_to_json(s));
    CHECK(back.state == s.state);
    CHECK(back.config == s.config);
    CHECK(replay_state(back, repo) == s.state);

    MemorySessionStore mem;
    mem.save(s);
    CHECK(mem.load("s-roundtrip", repo).state == s.state);
  }

  TEST_CASE("store errors") {
    const FeatureRepository& repo = default_repository();
    const auto dir = temp_dir("errors");
    DirectorySessionStore store(dir);
    CHECK(code_of([&] { store.load("s-missing", repo); }) == ErrorCode::kNotFound);
    CHECK(code_of([&] { store.load("../etc", repo); }) == ErrorCode::kNotFound);

    Backends backends = make_mock_backends(shared_default_repository(), 0.15);
    SessionRecord s = create_session("s-future", base_config(), repo, backends);
    json doc = session_to_json(s);
    doc["schema_version"] = kSessionSchemaVersion + 1;
    std::ofstream(dir / "s-future.json") << doc.dump();
    CHECK(code_of([&] { store.load("s-future", repo); }) == ErrorCode::kSchemaVersionMismatch);

    std::ofstream(dir / "s-corrupt.json") << "{\"schema_version\": 1, \"trunc";
    CHECK(code_of([&] { store.load("s-corrupt", repo); }) == ErrorCode::kStoreError);

    MemorySessionStore mem;
    CHECK(code_of([&] { mem.load("nope", repo); }) == ErrorCode::kNotFound);
  }

  TEST_CASE("manager persists every mutation") {
    auto repo = shared_default_repository();
    auto store = std::make_shared<MemorySessionStore>();
    SessionManager m(repo, store, mock_backend_factory(repo));
    SessionConfig cfg = base_config();
    cfg.max_rounds = 1;
    const SessionRecord s = m.create(cfg);
    CHECK(s.session_id.rfind("s-", 0) == 0);
    CHECK(store->contains(s.session_id));
    m.submit_feedback(s.session_id, alternate(s));
    CHECK(m.get(s.session_id).phase == Phase::kGenerating);
    CHECK(code_of([&] { m.advance(s.session_id); }) == ErrorCode::kRoundLimitReached);
    CHECK(m.get(s.session_id).phase == Phase::kClosed);
    CHECK(m.preferences(s.session_id).rounds_ingested == 1);
    CHECK(code_of([&] { m.get("s-unknown"); }) == ErrorCode::kNotFound);

    SessionConfig http = base_config();
    http.backend.kind = BackendKind::kHttp;
    http.backend.generation_url = "http://127.0.0.1:1";
    http.backend.extraction_url = "http://127.0.0.1:1";
    CHECK(code_of([&] { m.create(http); }) == ErrorCode::kConfigError);
  }

  TEST_CASE("manager serializes concurrent mutations") {
    auto repo = shared_default_repository();
    auto store = std::make_shared<MemorySessionStore>();
    SessionManager m(repo, store, mock_backend_factory(repo));
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) ids.push_back(m.create(base_config(i)).session_id);
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == 4);

    std::atomic<int> wrong_phase{0};
    std::atomic<int> accepted{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        const std::string& id = ids[t % 4];
        try {
          const SessionRecord s = m.get(id);
          m.submit_feedback(id, alternate(s));
          ++accepted;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kWrongPhase) ++wrong_phase;
        }
      });
    }
    for (auto& th : threads) th.join();
    // Two threads race per session; exactly one submission wins each race.
    CHECK(accepted == 4);
    CHECK(wrong_phase == 4);
    for (const auto& id : ids) CHECK(m.get(id).rounds.size() == 1);
  }
}
