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

#ifndef PREFLOOP_SESSION_H_
#define PREFLOOP_SESSION_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefloop/feature_repository.h"
#include "prefloop/model_adapters.h"
#include "prefloop/preference_engine.h"
#include "prefloop/prompt_assembly.h"
#include "prefloop/selection_sampling.h"

namespace prefloop {

enum class AssemblyMode { kTemplate, kVlm };

struct SessionConfig {
  std::string initial_prompt;
  int candidates_per_round = 4;
  BackendConfig backend;
  SamplingConfig sampling;
  EngineConfig engine;
  uint64_t seed = 0;
  int max_rounds = 20;
  AssemblyMode assembly = AssemblyMode::kTemplate;
  double or_neg_threshold = kDefaultNegativeThreshold;

  bool operator==(const SessionConfig&) const = default;
};

// Throws Error(kConfigError).
void validate_session_config(const SessionConfig& cfg);
nlohmann::json session_config_to_json(const SessionConfig& cfg);
// Missing keys take defaults; the result is validated.
SessionConfig session_config_from_json(const nlohmann::json& j);

enum class Phase { kAwaitingFeedback, kGenerating, kClosed };

std::string_view phase_name(Phase phase);

struct Candidate {
  ImageRef image;
  ImageFeatureProfile profile;
  PromptSpec prompt;

  bool operator==(const Candidate&) const = default;
};

struct SessionRecord {
  std::string session_id;
  SessionConfig config;
  PreferenceState state;
  // Full annotation log; replaying it rebuilds `state`.
  std::vector<FeedbackRound> rounds;
  std::vector<Candidate> current_candidates;
  Phase phase = Phase::kAwaitingFeedback;
  // Candidate batches generated so far; selects the rng streams of the next
  // batch.
  uint64_t generation_index = 0;

  bool operator==(const SessionRecord&) const = default;
};

inline constexpr int kSessionSchemaVersion = 1;

// Generates round-0 candidates from the neutral state. Throws kConfigError,
// kBackendUnreachable.
SessionRecord create_session(std::string session_id, const SessionConfig& config,
                             const FeatureRepository& repo, Backends& backends);

// Replaces the current candidates with a fresh batch. Statistics untouched.
// Throws kWrongPhase unless awaiting feedback.
void regenerate_candidates(SessionRecord& session, const FeatureRepository& repo,
                           Backends& backends);

// Candidates not mentioned are unlabeled. Throws kWrongPhase, kUnknownImage.
void submit_feedback(SessionRecord& session, const std::map<std::string, Annotation>& annotations,
                     const FeatureRepository& repo);

// Generates the next batch from the updated state. When max_rounds feedback
// rounds have been recorded the session is closed and kRoundLimitReached is
// thrown. Throws kWrongPhase unless generating.
void advance_round(SessionRecord& session, const FeatureRepository& repo, Backends& backends);

void close_session(SessionRecord& session);

// Rebuilds the preference state from the annotation log alone.
PreferenceState replay_state(const SessionRecord& session, const FeatureRepository& repo);

nlohmann::json session_to_json(const SessionRecord& session);
// Throws kSchemaVersionMismatch for documents newer than this build.
SessionRecord session_from_json(const nlohmann::json& j, const FeatureRepository& repo);

// Public view: no raw accumulators.
nlohmann::json session_view(const SessionRecord& session);
nlohmann::json candidates_view(const SessionRecord& session);

class SessionStore {
 public:
  virtual ~SessionStore() = default;
  virtual void save(const SessionRecord& session) = 0;
  // Throws kNotFound, kSchemaVersionMismatch, kStoreError.
  virtual SessionRecord load(const std::string& session_id, const FeatureRepository& repo) = 0;
  virtual bool contains(const std::string& session_id) = 0;
  virtual std::vector<std::string> list() = 0;
};

// One JSON document per session: <dir>/<session_id>.json.
class DirectorySessionStore : public SessionStore {
 public:
  explicit DirectorySessionStore(std::filesystem::path dir);

  void save(const SessionRecord& session) override;
  SessionRecord load(const std::string& session_id, const FeatureRepository& repo) override;
  bool contains(const std::string& session_id) override;
  std::vector<std::string> list() override;

  std::filesystem::path path_for(const std::string& session_id) const;

 private:
  std::filesystem::path dir_;
  std::mutex io_mutex_;
};

class MemorySessionStore : public SessionStore {
 public:
  void save(const SessionRecord& session) override;
  SessionRecord load(const std::string& session_id, const FeatureRepository& repo) override;
  bool contains(const std::string& session_id) override;
  std::vector<std::string> list() override;

 private:
  std::mutex mutex_;
  std::map<std::string, std::string> documents_;
};

using BackendFactory = std::function<Backends(const BackendConfig&)>;

// Mock-only factory; http configs raise kConfigError.
BackendFactory mock_backend_factory(std::shared_ptr<const FeatureRepository> repo);

// Thread-safe front end used by the HTTP API and the CLI. Mutations on one
// session are serialized; different sessions proceed in parallel. Every
// mutation is persisted before it returns.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const FeatureRepository> repo,
                 std::shared_ptr<SessionStore> store, BackendFactory backends);

  SessionRecord create(const SessionConfig& config);
  SessionRecord get(const std::string& session_id);
  SessionRecord submit_feedback(const std::string& session_id,
                                const std::map<std::string, Annotation>& annotations);
  SessionRecord advance(const std::string& session_id);
  SessionRecord regenerate(const std::string& session_id);
  SessionRecord close(const std::string& session_id);
  PreferenceSnapshot preferences(const std::string& session_id);

  const FeatureRepository& repository() const { return *repo_; }

 private:
  struct Slot {
    std::mutex mutex;
  };

  std::shared_ptr<Slot> slot_for(const std::string& session_id);
  template <typename Fn>
  SessionRecord mutate(const std::string& session_id, Fn&& fn);
  std::string new_session_id();

  std::shared_ptr<const FeatureRepository> repo_;
  std::shared_ptr<SessionStore> store_;
  BackendFactory backends_;
  std::mutex slots_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  uint64_t id_counter_ = 0;
};

}  // namespace prefloop

#endif  // PREFLOOP_SESSION_H_
