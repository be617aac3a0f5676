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

#ifndef PREFLOOP_SELECTION_SAMPLING_H_
#define PREFLOOP_SELECTION_SAMPLING_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prefloop/creative_pool.h"
#include "prefloop/feature_repository.h"
#include "prefloop/preference_engine.h"
#include "prefloop/rng.h"

namespace prefloop {

struct SamplingConfig {
  double sigma_samp = 0.03;
  // Minimum |d| for an ordinal feature to be steered.
  double d_gate = 0.8;
  int pool_per_category = 2;
  // Added to every odds ratio before roulette selection.
  double exploration_floor = 0.0;
  // Roulette weights are OR^(1/temperature); 1 is plain proportional
  // selection.
  double temperature = 1.0;

  bool operator==(const SamplingConfig&) const = default;
};

// Throws Error(kConfigError) on invalid settings.
void validate_sampling_config(const SamplingConfig& cfg);
nlohmann::json sampling_config_to_json(const SamplingConfig& cfg);
SamplingConfig sampling_config_from_json(const nlohmann::json& j);

struct OrdinalDraw {
  double center = 0.0;  // mu_liked
  double x = 0.0;       // truncated-normal sample
  double d = 0.0;

  bool operator==(const OrdinalDraw&) const = default;
};

struct SampledFeatureBundle {
  std::map<std::string, std::string> discrete_choices;
  std::map<std::string, std::string> ordinal_choices;
  std::map<std::string, OrdinalDraw> ordinal_draws;
  std::vector<std::string> creative_refs;
  uint64_t rng_seed = 0;

  bool empty() const {
    return discrete_choices.empty() && ordinal_choices.empty() && creative_refs.empty();
  }
  const std::string* choice_for(const std::string& feature_id) const;

  bool operator==(const SampledFeatureBundle&) const = default;
};

nlohmann::json bundle_to_json(const SampledFeatureBundle& bundle);
SampledFeatureBundle bundle_from_json(const nlohmann::json& j);

// Draws a value with probability proportional to its weight. Throws
// kEmptyDomain for an empty list and kDomainError for a non-positive or
// non-finite weight.
const std::string& roulette_sample(const std::vector<std::pair<std::string, double>>& weights,
                                   Rng& rng);

// Normal(mu, sigma^2) restricted to [0,1]: up to 64 rejection attempts, then
// the last draw is clamped.
double sample_truncated_normal(double mu, double sigma, Rng& rng);

// Samples around mu_liked and snaps to the nearest level. Throws
// kKindMismatch for non-ordinal specs.
const std::string& gaussian_sample_ordinal(const FeatureSpec& spec, double mu_liked,
                                           const SamplingConfig& cfg, Rng& rng);

// Up to pool_per_category texts per category, uniformly without
// replacement; categories in fixed order.
std::vector<std::string> pool_sample(const CreativeMaterialsPool& pool, const SamplingConfig& cfg,
                                     Rng& rng);

// One candidate's feature bundle drawn from the current preferences.
SampledFeatureBundle select_feature_bundle(const PreferenceState& state,
                                           const FeatureRepository& repo,
                                           const SamplingConfig& cfg, uint64_t seed);

}  // namespace prefloop

#endif  // PREFLOOP_SELECTION_SAMPLING_H_
