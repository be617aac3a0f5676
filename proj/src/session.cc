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

#include "prefloop/session.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "prefloop/error.h"
#include "prefloop/rng.h"

namespace prefloop {

using json = nlohmann::json;

void validate_session_config(const SessionConfig& cfg) {
  if (cfg.initial_prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "initial_prompt must not be empty");
  }
  if (cfg.candidates_per_round < 2) {
    throw Error(ErrorCode::kConfigError, "candidates_per_round must be at least 2");
  }
  if (cfg.max_rounds < 1) throw Error(ErrorCode::kConfigError, "max_rounds must be at least 1");
  if (!(cfg.or_neg_threshold > 0.0 && cfg.or_neg_threshold < 1.0)) {
    throw Error(ErrorCode::kConfigError, "or_neg_threshold must lie in (0,1)");
  }
  validate_sampling_config(cfg.sampling);
  validate_backend_config(cfg.backend);
}

json session_config_to_json(const SessionConfig& cfg) {
  return json{{"initial_prompt", cfg.initial_prompt},
              {"candidates_per_round", cfg.candidates_per_round},
              {"backend", backend_config_to_json(cfg.backend)},
              {"sampling", sampling_config_to_json(cfg.sampling)},
              {"engine", engine_config_to_json(cfg.engine)},
              {"seed", cfg.seed},
              {"max_rounds", cfg.max_rounds},
              {"assembly", cfg.assembly == AssemblyMode::kTemplate ? "template" : "vlm"},
              {"or_neg_threshold", cfg.or_neg_threshold}};
}

SessionConfig session_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfigError, "session config must be an object");
  SessionConfig cfg;
  try {
    cfg.initial_prompt = j.value("initial_prompt", cfg.initial_prompt);
    cfg.candidates_per_round = j.value("candidates_per_round", cfg.candidates_per_round);
    if (auto it = j.find("backend"); it != j.end()) cfg.backend = backend_config_from_json(*it);
    if (auto it = j.find("sampling"); it != j.end()) {
      cfg.sampling = sampling_config_from_json(*it);
    }
    if (auto it = j.find("engine"); it != j.end()) cfg.engine = engine_config_from_json(*it);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.max_rounds = j.value("max_rounds", cfg.max_rounds);
    const std::string assembly = j.value("assembly", std::string("template"));
    if (assembly == "template") {
      cfg.assembly = AssemblyMode::kTemplate;
    } else if (assembly == "vlm") {
      cfg.assembly = AssemblyMode::kVlm;
    } else {
      throw Error(ErrorCode::kConfigError, "assembly must be template or vlm");
    }
    cfg.or_neg_threshold = j.value("or_neg_threshold", cfg.or_neg_threshold);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfigError, std::string("session config: ") + e.what());
  }
  validate_session_config(cfg);
  return cfg;
}

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kAwaitingFeedback: return "awaiting_feedback";
    case Phase::kGenerating: return "generating";
    case Phase::kClosed: return "closed";
  }
  return "closed";
}

namespace {

Phase parse_phase(const std::string& name) {
  if (name == "awaiting_feedback") return Phase::kAwaitingFeedback;
  if (name == "generating") return Phase::kGenerating;
  if (name == "closed") return Phase::kClosed;
  throw Error(ErrorCode::kStoreError, "unknown phase '" + name + "' in session document");
}

void require_phase(const SessionRecord& s, Phase expected, std::string_view op) {
  if (s.phase != expected) {
    throw Error(ErrorCode::kWrongPhase,
                std::string(op) + " requires phase " + std::string(phase_name(expected)) +
                    ", session is " + std::string(phase_name(s.phase)),
                s.session_id);
  }
}

// Builds one candidate batch from the current state without touching the
// record, so a backend failure leaves the session as it was.
std::vector<Candidate> generate_batch(const SessionRecord& s, uint64_t generation,
                                      const FeatureRepository& repo, Backends& backends) {
  const SessionConfig& cfg = s.config;
  const std::vector<ValueDescriptor> negatives =
      derive_negative_terms(s.state, repo, cfg.or_neg_threshold);

  std::vector<PromptSpec> prompts;
  for (int i = 0; i < cfg.candidates_per_round; ++i) {
    const uint64_t stream = derive_seed(cfg.seed, {generation, static_cast<uint64_t>(i)});
    SampledFeatureBundle bundle = select_feature_bundle(s.state, repo, cfg.sampling, stream);
    PromptSpec prompt =
        cfg.assembly == AssemblyMode::kVlm
            ? assemble_prompt_vlm(cfg.initial_prompt, bundle, negatives, repo, *backends.completion)
            : assemble_prompt_template(cfg.initial_prompt, bundle, negatives, repo);
    prompt.id = s.session_id + "-g" + std::to_string(generation) + "-c" + std::to_string(i);
    prompts.push_back(std::move(prompt));
  }

  std::vector<ImageRef> images =
      backends.generation->generate(prompts, derive_seed(cfg.seed, {generation, 0xfffffffful}));
  if (images.size() != prompts.size()) {
    throw Error(ErrorCode::kBackendProtocolError, "generation backend returned wrong image count");
  }
  std::vector<ImageFeatureProfile> profiles = backends.extraction->extract(images);
  if (profiles.size() != images.size()) {
    throw Error(ErrorCode::kBackendProtocolError, "extraction backend returned wrong profile count");
  }

  std::vector<Candidate> batch;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < images.size(); ++i) {
    validate_profile(profiles[i], repo);
    if (!ids.insert(images[i].id).second) {
      throw Error(ErrorCode::kBackendProtocolError, "duplicate image id '" + images[i].id + "'");
    }
    profiles[i].image_id = images[i].id;
    batch.push_back(Candidate{std::move(images[i]), std::move(profiles[i]), std::move(prompts[i])});
  }
  return batch;
}

void replace_candidates(SessionRecord& s, const FeatureRepository& repo, Backends& backends) {
  s.current_candidates = generate_batch(s, s.generation_index, repo, backends);
  ++s.generation_index;
}

}  // namespace

SessionRecord create_session(std::string session_id, const SessionConfig& config,
                             const FeatureRepository& repo, Backends& backends) {
  validate_session_config(config);
  SessionRecord s{std::move(session_id), config, PreferenceState(repo, config.engine), {}, {},
                  Phase::kAwaitingFeedback, 0};
  replace_candidates(s, repo, backends);
  return s;
}

void regenerate_candidates(SessionRecord& session, const FeatureRepository& repo,
                           Backends& backends) {
  require_phase(session, Phase::kAwaitingFeedback, "regenerate");
  replace_candidates(session, repo, backends);
}

void submit_feedback(SessionRecord& session, const std::map<std::string, Annotation>& annotations,
                     const FeatureRepository& repo) {
  require_phase(session, Phase::kAwaitingFeedback, "feedback");
  for (const auto& [image_id, _] : annotations) {
    bool known = false;
    for (const auto& c : session.current_candidates) known = known || c.image.id == image_id;
    if (!known) {
      throw Error(ErrorCode::kUnknownImage,
                  "image '" + image_id + "' is not a current candidate", image_id);
    }
  }
  FeedbackRound round;
  round.round_index = static_cast<int>(session.rounds.size()) + 1;
  for (const auto& c : session.current_candidates) {
    auto it = annotations.find(c.image.id);
    round.entries.push_back(
        FeedbackEntry{c.profile, it == annotations.end() ? Annotation::kUnlabeled : it->second});
  }
  session.state.ingest_round(round, repo);
  session.rounds.push_back(std::move(round));
  session.phase = Phase::kGenerating;
}

void advance_round(SessionRecord& session, const FeatureRepository& repo, Backends& backends) {
  require_phase(session, Phase::kGenerating, "next");
  if (static_cast<int>(session.rounds.size()) >= session.config.max_rounds) {
    session.phase = Phase::kClosed;
    throw Error(ErrorCode::kRoundLimitReached,
                "session reached max_rounds=" + std::to_string(session.config.max_rounds),
                session.session_id);
  }
  replace_candidates(session, repo, backends);
  session.phase = Phase::kAwaitingFeedback;
}

void close_session(SessionRecord& session) { session.phase = Phase::kClosed; }

PreferenceState replay_state(const SessionRecord& session, const FeatureRepository& repo) {
  PreferenceState state(repo, session.config.engine);
  for (const auto& round : session.rounds) state.ingest_round(round, repo);
  return state;
}

json session_to_json(const SessionRecord& s) {
  json rounds = json::array();
  for (const auto& r : s.rounds) rounds.push_back(feedback_round_to_json(r));
  json candidates = json::array();
  for (const auto& c : s.current_candidates) {
    candidates.push_back({{"image", image_ref_to_json(c.image)},
                          {"profile", profile_to_json(c.profile)},
                          {"prompt", prompt_spec_to_json(c.prompt)}});
  }
  return json{{"schema_version", kSessionSchemaVersion},
              {"session_id", s.session_id},
              {"config", session_config_to_json(s.config)},
              {"state", s.state.to_json()},
              {"rounds", std::move(rounds)},
              {"current_candidates", std::move(candidates)},
              {"phase", phase_name(s.phase)},
              {"generation_index", s.generation_index}};
}

SessionRecord session_from_json(const json& j, const FeatureRepository& repo) {
  const int version = j.at("schema_version").get<int>();
  if (version > kSessionSchemaVersion) {
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "session schema " + std::to_string(version) + " is newer than supported " +
                    std::to_string(kSessionSchemaVersion));
  }
  SessionConfig config = session_config_from_json(j.at("config"));
  SessionRecord s{j.at("session_id").get<std::string>(), config,
                  PreferenceState::from_json(j.at("state"), repo), {}, {},
                  parse_phase(j.at("phase").get<std::string>()),
                  j.at("generation_index").get<uint64_t>()};
  for (const auto& r : j.at("rounds")) s.rounds.push_back(feedback_round_from_json(r));
  for (const auto& c : j.at("current_candidates")) {
    s.current_candidates.push_back(Candidate{image_ref_from_json(c.at("image")),
                                             profile_from_json(c.at("profile")),
                                             prompt_spec_from_json(c.at("prompt"))});
  }
  return s;
}

json candidates_view(const SessionRecord& s) {
  json out = json::array();
  for (const auto& c : s.current_candidates) {
    out.push_back({{"image_id", c.image.id},
                   {"uri", c.image.uri},
                   {"prompt", c.prompt.positive_prompt},
                   {"negative_prompt", c.prompt.negative_prompt},
                   {"features", profile_to_extraction_json(c.profile)}});
  }
  return out;
}

json session_view(const SessionRecord& s) {
  json rounds = json::array();
  for (const auto& r : s.rounds) {
    rounds.push_back({{"round_index", r.round_index},
                      {"liked", r.count(Annotation::kLiked)},
                      {"disliked", r.count(Annotation::kDisliked)},
                      {"unlabeled", r.count(Annotation::kUnlabeled)},
                      {"degenerate", r.is_degenerate()}});
  }
  json config = session_config_to_json(s.config);
  return json{{"session_id", s.session_id},
              {"phase", phase_name(s.phase)},
              {"round_index", s.rounds.size()},
              {"rounds_ingested", s.state.rounds_ingested()},
              {"pool_size", s.state.pool().size()},
              {"config", std::move(config)},
              {"candidates", candidates_view(s)},
              {"rounds", std::move(rounds)}};
}

DirectorySessionStore::DirectorySessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kStoreError, "cannot create store directory " + dir_.string());
}

std::filesystem::path DirectorySessionStore::path_for(const std::string& session_id) const {
  if (session_id.empty() || session_id.find_first_of("/\\.") != std::string::npos) {
    throw Error(ErrorCode::kNotFound, "invalid session id '" + session_id + "'", session_id);
  }
  return dir_ / (session_id + ".json");
}

void DirectorySessionStore::save(const SessionRecord& session) {
  const auto path = path_for(session.session_id);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  std::lock_guard lock(io_mutex_);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << session_to_json(session).dump(1);
    if (!out) throw Error(ErrorCode::kStoreError, "cannot write " + tmp.string(), session.session_id);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kStoreError, "cannot replace " + path.string(), session.session_id);
}

namespace {

SessionRecord parse_document(const std::string& text, const std::string& session_id,
                             const FeatureRepository& repo) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kStoreError, std::string("corrupt session document: ") + e.what(),
                session_id);
  }
  try {
    return session_from_json(doc, repo);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kStoreError, std::string("malformed session document: ") + e.what(),
                session_id);
  }
}

}  // namespace

SessionRecord DirectorySessionStore::load(const std::string& session_id,
                                          const FeatureRepository& repo) {
  const auto path = path_for(session_id);
  std::string text;
  {
    std::lock_guard lock(io_mutex_);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kNotFound, "no session '" + session_id + "'", session_id);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  return parse_document(text, session_id, repo);
}

bool DirectorySessionStore::contains(const std::string& session_id) {
  std::error_code ec;
  return std::filesystem::exists(path_for(session_id), ec);
}

std::vector<std::string> DirectorySessionStore::list() {
  std::vector<std::string> ids;
  std::lock_guard lock(io_mutex_);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void MemorySessionStore::save(const SessionRecord& session) {
  std::string doc = session_to_json(session).dump();
  std::lock_guard lock(mutex_);
  documents_[session.session_id] = std::move(doc);
}

SessionRecord MemorySessionStore::load(const std::string& session_id,
                                       const FeatureRepository& repo) {
  std::string doc;
  {
    std::lock_guard lock(mutex_);
    auto it = documents_.find(session_id);
    if (it == documents_.end()) {
      throw Error(ErrorCode::kNotFound, "no session '" + session_id + "'", session_id);
    }
    doc = it->second;
  }
  return parse_document(doc, session_id, repo);
}

bool MemorySessionStore::contains(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  return documents_.contains(session_id);
}

std::vector<std::string> MemorySessionStore::list() {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : documents_) ids.push_back(id);
  return ids;
}

BackendFactory mock_backend_factory(std::shared_ptr<const FeatureRepository> repo) {
  return [repo](const BackendConfig& cfg) {
    if (cfg.kind != BackendKind::kMock) {
      throw Error(ErrorCode::kConfigError, "this build only provides the mock backend");
    }
    return make_mock_backends(repo, cfg.p_noise);
  };
}

SessionManager::SessionManager(std::shared_ptr<const FeatureRepository> repo,
                               std::shared_ptr<SessionStore> store, BackendFactory backends)
    : repo_(std::move(repo)), store_(std::move(store)), backends_(std::move(backends)) {}

std::shared_ptr<SessionManager::Slot> SessionManager::slot_for(const std::string& session_id) {
  std::lock_guard lock(slots_mutex_);
  auto& slot = slots_[session_id];
  if (!slot) slot = std::make_shared<Slot>();
  return slot;
}

std::string SessionManager::new_session_id() {
  static thread_local std::random_device device;
  uint64_t counter;
  {
    std::lock_guard lock(slots_mutex_);
    counter = ++id_counter_;
  }
  const uint64_t now = static_cast<uint64_t>(
      std::chrono::steady_clock::now().time_since_epoch().count());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s-%016llx",
                static_cast<unsigned long long>(
                    derive_seed((static_cast<uint64_t>(device()) << 32) ^ device(), {now, counter})));
  return buf;
}

template <typename Fn>
SessionRecord SessionManager::mutate(const std::string& session_id, Fn&& fn) {
  auto slot = slot_for(session_id);
  std::lock_guard lock(slot->mutex);
  SessionRecord s = store_->load(session_id, *repo_);
  try {
    fn(s);
  } catch (const Error& e) {
    // The round limit closes the session as part of failing.
    if (e.code() == ErrorCode::kRoundLimitReached) store_->save(s);
    throw;
  }
  store_->save(s);
  return s;
}

SessionRecord SessionManager::create(const SessionConfig& config) {
  validate_session_config(config);
  Backends backends = backends_(config.backend);
  std::string id = new_session_id();
  auto slot = slot_for(id);
  std::lock_guard lock(slot->mutex);
  SessionRecord s = create_session(id, config, *repo_, backends);
  store_->save(s);
  return s;
}

SessionRecord SessionManager::get(const std::string& session_id) {
  auto slot = slot_for(session_id);
  std::lock_guard lock(slot->mutex);
  return store_->load(session_id, *repo_);
}

SessionRecord SessionManager::submit_feedback(
    const std::string& session_id, const std::map<std::string, Annotation>& annotations) {
  return mutate(session_id,
                [&](SessionRecord& s) { prefloop::submit_feedback(s, annotations, *repo_); });
}

SessionRecord SessionManager::advance(const std::string& session_id) {
  return mutate(session_id, [&](SessionRecord& s) {
    Backends backends = backends_(s.config.backend);
    advance_round(s, *repo_, backends);
  });
}

SessionRecord SessionManager::regenerate(const std::string& session_id) {
  return mutate(session_id, [&](SessionRecord& s) {
    Backends backends = backends_(s.config.backend);
    regenerate_candidates(s, *repo_, backends);
  });
}

SessionRecord SessionManager::close(const std::string& session_id) {
  return mutate(session_id, [](SessionRecord& s) { close_session(s); });
}

PreferenceSnapshot SessionManager::preferences(const std::string& session_id) {
  SessionRecord s = get(session_id);
  return preference_snapshot(s.state, *repo_, s.config.sampling.d_gate);
}

}  // namespace prefloop
