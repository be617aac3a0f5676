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

#ifndef PREFLOOP_TESTS_TEST_SUPPORT_H_
#define PREFLOOP_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "prefloop/feature_repository.h"
#include "prefloop/preference_engine.h"
#include "prefloop/profile.h"
#include "prefloop/rng.h"

namespace prefloop::testing {

inline std::shared_ptr<const FeatureRepository> shared_default_repository() {
  return std::shared_ptr<const FeatureRepository>(&default_repository(),
                                                  [](const FeatureRepository*) {});
}

// Three features: one discrete with the conflicting-signal values, one
// four-level ordinal and one free-form routed to the pool.
inline const FeatureRepository& tiny_repository() {
  static const FeatureRepository repo = load_repository(R"({
    "version": "test",
    "dimensions": ["composition", "color", "distinctive"],
    "features": [
      {"id": "component", "dimension": "composition", "kind": "discrete",
       "values": ["compA", "compB", "neither"]},
      {"id": "brightness", "dimension": "color", "kind": "ordinal",
       "values": ["dark", "dim", "bright", "high_key"]},
      {"id": "unique_elements", "dimension": "distinctive", "kind": "freeform",
       "values": [], "pool_category": "unique_elements"}
    ]})");
  return repo;
}

// Every discrete/ordinal feature at its first value, free-form empty, then
// the overrides applied.
inline ImageFeatureProfile make_profile(const FeatureRepository& repo, const std::string& id,
                                        const std::map<std::string, std::string>& overrides = {}) {
  ImageFeatureProfile p;
  p.image_id = id;
  for (const auto& spec : repo.features()) {
    switch (spec.kind) {
      case FeatureKind::kDiscrete:
        p.discrete_values[spec.id] = spec.values.front();
        break;
      case FeatureKind::kOrdinal:
        p.ordinal_values[spec.id] = spec.values.front();
        break;
      case FeatureKind::kFreeForm:
        p.freeform_values[spec.id] = {};
        break;
    }
  }
  for (const auto& [f, v] : overrides) {
    if (p.discrete_values.contains(f)) p.discrete_values[f] = v;
    if (p.ordinal_values.contains(f)) p.ordinal_values[f] = v;
    if (p.freeform_values.contains(f)) p.freeform_values[f] = {v};
  }
  return p;
}

inline ImageFeatureProfile random_profile(const FeatureRepository& repo, const std::string& id,
                                          Rng& rng) {
  ImageFeatureProfile p;
  p.image_id = id;
  for (const auto& spec : repo.features()) {
    if (spec.kind == FeatureKind::kFreeForm) {
      std::vector<std::string> texts;
      const std::size_t n = rng.index(3);
      for (std::size_t i = 0; i < n; ++i) texts.push_back("text " + std::to_string(rng.index(20)));
      p.freeform_values[spec.id] = texts;
      continue;
    }
    const std::string& v = spec.values[rng.index(spec.values.size())];
    (spec.kind == FeatureKind::kDiscrete ? p.discrete_values : p.ordinal_values)[spec.id] = v;
  }
  return p;
}

// Annotation mix skewed so that degenerate and informative rounds both occur.
inline FeedbackRound random_round(const FeatureRepository& repo, int round_index,
                                  std::size_t candidates, Rng& rng) {
  FeedbackRound r;
  r.round_index = round_index;
  for (std::size_t i = 0; i < candidates; ++i) {
    const double u = rng.uniform();
    const Annotation a = u < 0.45 ? Annotation::kLiked
                         : u < 0.9 ? Annotation::kDisliked
                                   : Annotation::kUnlabeled;
    r.entries.push_back(FeedbackEntry{
        random_profile(repo, "r" + std::to_string(round_index) + "-" + std::to_string(i), rng),
        a});
  }
  return r;
}

inline FeedbackEntry entry(const FeatureRepository& repo, const std::string& id, Annotation a,
                           const std::map<std::string, std::string>& overrides = {}) {
  return FeedbackEntry{make_profile(repo, id, overrides), a};
}

// |a - b| <= rel * max(|a|, |b|) + abs_floor.
inline bool close_rel(double a, double b, double rel = 1e-9, double abs_floor = 1e-12) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace prefloop::testing

#endif  // PREFLOOP_TESTS_TEST_SUPPORT_H_
