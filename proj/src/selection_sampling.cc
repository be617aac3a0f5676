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

#include "prefloop/selection_sampling.h"

#include <algorithm>
#include <cmath>

#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

namespace {
constexpr int kMaxRejectionAttempts = 64;
}  // namespace

void validate_sampling_config(const SamplingConfig& cfg) {
  if (!(cfg.sigma_samp > 0.0)) throw Error(ErrorCode::kConfigError, "sigma_samp must be > 0");
  if (!(cfg.d_gate >= 0.0)) throw Error(ErrorCode::kConfigError, "d_gate must be >= 0");
  if (cfg.pool_per_category < 0) {
    throw Error(ErrorCode::kConfigError, "pool_per_category must be >= 0");
  }
  if (!(cfg.exploration_floor >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "exploration_floor must be >= 0");
  }
  if (!(cfg.temperature > 0.0)) throw Error(ErrorCode::kConfigError, "temperature must be > 0");
}

json sampling_config_to_json(const SamplingConfig& cfg) {
  return json{{"sigma_samp", cfg.sigma_samp},
              {"d_gate", cfg.d_gate},
              {"pool_per_category", cfg.pool_per_category},
              {"exploration_floor", cfg.exploration_floor},
              {"temperature", cfg.temperature}};
}

SamplingConfig sampling_config_from_json(const json& j) {
  SamplingConfig cfg;
  cfg.sigma_samp = j.value("sigma_samp", cfg.sigma_samp);
  cfg.d_gate = j.value("d_gate", cfg.d_gate);
  cfg.pool_per_category = j.value("pool_per_category", cfg.pool_per_category);
  cfg.exploration_floor = j.value("exploration_floor", cfg.exploration_floor);
  cfg.temperature = j.value("temperature", cfg.temperature);
  validate_sampling_config(cfg);
  return cfg;
}

const std::string* SampledFeatureBundle::choice_for(const std::string& feature_id) const {
  if (auto it = discrete_choices.find(feature_id); it != discrete_choices.end()) return &it->second;
  if (auto it = ordinal_choices.find(feature_id); it != ordinal_choices.end()) return &it->second;
  return nullptr;
}

json bundle_to_json(const SampledFeatureBundle& bundle) {
  json draws = json::object();
  for (const auto& [f, d] : bundle.ordinal_draws) {
    draws[f] = {{"center", d.center}, {"x", d.x}, {"d", d.d}};
  }
  return json{{"discrete_choices", bundle.discrete_choices},
              {"ordinal_choices", bundle.ordinal_choices},
              {"ordinal_draws", std::move(draws)},
              {"creative_refs", bundle.creative_refs},
              {"rng_seed", bundle.rng_seed}};
}

SampledFeatureBundle bundle_from_json(const json& j) {
  SampledFeatureBundle b;
  b.discrete_choices = j.at("discrete_choices").get<std::map<std::string, std::string>>();
  b.ordinal_choices = j.at("ordinal_choices").get<std::map<std::string, std::string>>();
  for (const auto& [f, d] : j.at("ordinal_draws").items()) {
    b.ordinal_draws[f] = OrdinalDraw{d.at("center").get<double>(), d.at("x").get<double>(),
                                     d.at("d").get<double>()};
  }
  b.creative_refs = j.at("creative_refs").get<std::vector<std::string>>();
  b.rng_seed = j.at("rng_seed").get<uint64_t>();
  return b;
}

const std::string& roulette_sample(const std::vector<std::pair<std::string, double>>& weights,
                                   Rng& rng) {
  if (weights.empty()) throw Error(ErrorCode::kEmptyDomain, "roulette over an empty domain");
  double total = 0.0;
  for (const auto& [value, w] : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kDomainError, "roulette weight for '" + value + "' is not positive");
    }
    total += w;
  }
  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  for (const auto& [value, w] : weights) {
    cumulative += w;
    if (target < cumulative) return value;
  }
  return weights.back().first;  // rounding at the top of the wheel
}

double sample_truncated_normal(double mu, double sigma, Rng& rng) {
  double x = mu;
  for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
    x = mu + sigma * rng.normal();
    if (x >= 0.0 && x <= 1.0) return x;
  }
  return std::clamp(x, 0.0, 1.0);
}

const std::string& gaussian_sample_ordinal(const FeatureSpec& spec, double mu_liked,
                                           const SamplingConfig& cfg, Rng& rng) {
  if (spec.kind != FeatureKind::kOrdinal) {
    throw Error(ErrorCode::kKindMismatch, "feature '" + spec.id + "' is not ordinal", spec.id);
  }
  return nearest_level(spec, sample_truncated_normal(mu_liked, cfg.sigma_samp, rng));
}

std::vector<std::string> pool_sample(const CreativeMaterialsPool& pool, const SamplingConfig& cfg,
                                     Rng& rng) {
  std::vector<std::string> out;
  const auto take = static_cast<std::size_t>(cfg.pool_per_category);
  for (PoolCategory category : kPoolCategories) {
    std::vector<const PoolEntry*> entries = pool.in_category(category);
    // Partial Fisher-Yates.
    const std::size_t n = std::min(take, entries.size());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + rng.index(entries.size() - i);
      std::swap(entries[i], entries[j]);
      out.push_back(entries[i]->text);
    }
  }
  return out;
}

SampledFeatureBundle select_feature_bundle(const PreferenceState& state,
                                           const FeatureRepository& repo,
                                           const SamplingConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  SampledFeatureBundle bundle;
  bundle.rng_seed = seed;
  for (const FeatureSpec& spec : repo.features()) {
    if (spec.kind == FeatureKind::kDiscrete) {
      std::vector<std::pair<std::string, double>> weights;
      weights.reserve(spec.values.size());
      for (const auto& v : spec.values) {
        double w = state.cumulative_odds_ratio(spec.id, v) + cfg.exploration_floor;
        if (cfg.temperature != 1.0) w = std::pow(w, 1.0 / cfg.temperature);
        weights.emplace_back(v, w);
      }
      bundle.discrete_choices[spec.id] = roulette_sample(weights, rng);
    } else if (spec.kind == FeatureKind::kOrdinal) {
      const auto effect = state.try_cumulative_effect_size(spec.id);
      if (!effect || std::abs(effect->d) < cfg.d_gate) continue;
      const double center = std::clamp(effect->mu_liked, 0.0, 1.0);
      const double x = sample_truncated_normal(center, cfg.sigma_samp, rng);
      bundle.ordinal_choices[spec.id] = nearest_level(spec, x);
      bundle.ordinal_draws[spec.id] = OrdinalDraw{center, x, effect->d};
    }
  }
  bundle.creative_refs = pool_sample(state.pool(), cfg, rng);
  return bundle;
}

}  // namespace prefloop
