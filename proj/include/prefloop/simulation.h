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

#ifndef PREFLOOP_SIMULATION_H_
#define PREFLOOP_SIMULATION_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefloop/feature_repository.h"
#include "prefloop/preference_engine.h"
#include "prefloop/profile.h"
#include "prefloop/rng.h"
#include "prefloop/session.h"

namespace prefloop {

// Hidden preferences of a simulated user.
struct TargetProfile {
  std::map<std::string, std::string> discrete_targets;
  std::map<std::string, std::string> ordinal_targets;
  double like_threshold = 0.6;
  double noise_rate = 0.0;

  std::size_t target_count() const { return discrete_targets.size() + ordinal_targets.size(); }
  bool operator==(const TargetProfile&) const = default;
};

// Throws kConfigError for out-of-range parameters, kUnknownFeature,
// kKindMismatch or kUnknownValue for bad targets.
void validate_target_profile(const TargetProfile& profile, const FeatureRepository& repo);
nlohmann::json target_profile_to_json(const TargetProfile& profile);
TargetProfile target_profile_from_json(const nlohmann::json& j, const FeatureRepository& repo);

// Fraction of targeted features the candidate matches; 1 with no targets.
double target_utility(const TargetProfile& profile, const ImageFeatureProfile& candidate);

// One uniform draw per candidate, in order, whether or not noise is enabled,
// so runs that differ only in noise_rate share their random stream.
std::map<std::string, Annotation> simulated_feedback(
    const TargetProfile& profile, const std::vector<ImageFeatureProfile>& candidates, Rng& rng);

struct DiscreteOutcome {
  std::string feature;
  std::string target;
  std::string top_value;  // first maximum in repository order
  double target_odds_ratio = 1.0;
  bool top1_correct = false;  // the target strictly beats every other value
};

struct OrdinalOutcome {
  std::string feature;
  std::string target;
  std::optional<EffectSize> effect;
  bool sign_correct = false;
  bool emphasis_passed = false;
};

struct ConvergenceReport {
  int trial = 0;
  uint64_t seed = 0;
  int rounds_used = 0;
  int initial_regenerations = 0;
  std::vector<DiscreteOutcome> discrete;
  std::vector<OrdinalOutcome> ordinal;
  double aggregate_accuracy = 1.0;

  nlohmann::json to_json() const;
};

// Scores a state against the hidden targets.
ConvergenceReport evaluate_state(const PreferenceState& state, const TargetProfile& profile,
                                 const FeatureRepository& repo);

struct ExperimentOptions {
  int rounds = 10;
  int trials = 100;
  // Round 0 is regenerated until the simulated user would like at least one
  // candidate, at most this many times.
  int max_initial_regenerations = 200;
};

// Runs independent mock-backed sessions; trial k uses
// derive_seed(session_cfg.seed, {k}). Throws kConfigError for non-mock
// backends, rounds < 1 or trials < 1.
std::vector<ConvergenceReport> run_experiment(std::shared_ptr<const FeatureRepository> repo,
                                              const TargetProfile& profile,
                                              const SessionConfig& session_cfg,
                                              const ExperimentOptions& options);

struct ExperimentSummary {
  int trials = 0;
  double mean_aggregate_accuracy = 0.0;
  double mean_discrete_top1 = 0.0;  // over all trials and targeted discrete features
  std::map<std::string, double> ordinal_pass_rate;  // sign and emphasis both hold
  std::map<std::string, double> ordinal_sign_rate;

  nlohmann::json to_json() const;
};

ExperimentSummary summarize(const std::vector<ConvergenceReport>& reports);

// Statistics recomputed from the stored rounds alone.
struct BruteForceStats {
  std::map<std::string, std::map<std::string, double>> odds_ratios;
  std::map<std::string, std::optional<EffectSize>> effects;
};

BruteForceStats brute_force_state(const std::vector<FeedbackRound>& rounds,
                                  const FeatureRepository& repo, const EngineConfig& config = {});

}  // namespace prefloop

#endif  // PREFLOOP_SIMULATION_H_
