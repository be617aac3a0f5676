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

#ifndef PREFLOOP_PREFERENCE_ENGINE_H_
#define PREFLOOP_PREFERENCE_ENGINE_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "prefloop/creative_pool.h"
#include "prefloop/feature_repository.h"
#include "prefloop/profile.h"

namespace prefloop {

enum class Annotation { kLiked, kDisliked, kUnlabeled };

std::string_view annotation_name(Annotation a);  // "liked" | "disliked" | "unlabeled"
std::optional<Annotation> parse_annotation(std::string_view name);

struct FeedbackEntry {
  ImageFeatureProfile profile;
  Annotation annotation = Annotation::kUnlabeled;

  bool operator==(const FeedbackEntry&) const = default;
};

struct FeedbackRound {
  int round_index = 1;
  std::vector<FeedbackEntry> entries;

  std::size_t count(Annotation a) const;
  // A round without both a liked and a disliked entry carries no contrast.
  bool is_degenerate() const {
    return count(Annotation::kLiked) == 0 || count(Annotation::kDisliked) == 0;
  }

  bool operator==(const FeedbackRound&) const = default;
};

nlohmann::json feedback_round_to_json(const FeedbackRound& round);
FeedbackRound feedback_round_from_json(const nlohmann::json& j);

// 2x2 table for one value in one round:
//            present  absent
//   liked       a       c
//   disliked    b       d
struct ContingencyCells {
  int a = 0;
  int b = 0;
  int c = 0;
  int d = 0;

  int total() const { return a + b + c + d; }
  bool operator==(const ContingencyCells&) const = default;
};

inline constexpr double kHaldaneCorrection = 0.5;
// A weighted cell below this counts as empty for the correction rule.
inline constexpr double kEmptyCellThreshold = 1e-9;
// Maximum variance of a variable bounded in [0,1].
inline constexpr double kMaxUnitVariance = 0.25;
inline constexpr double kEffectSizeEpsilon = 1e-6;
inline constexpr double kEffectSizeClamp = 10.0;

// Counts annotated entries by (annotation, value presence); unlabeled entries
// are skipped. Throws kKindMismatch for free-form features and kUnknownValue
// for values outside the spec.
ContingencyCells round_contingency(const FeedbackRound& round, const FeatureSpec& spec,
                                   std::string_view value_id);

// (a+h)(d+h) / ((b+h)(c+h)) with h = 0.5 only when some cell is zero.
double round_odds_ratio(const ContingencyCells& cells);

// Binary entropy in bits, 0*log(0) taken as 0. Throws kDomainError outside
// [0,1].
double entropy_weight(double occurrence_rate);

// Round informativeness for ordinal features: min(variance / 0.25, 1).
double ordinal_round_weight(double round_variance);

// Mean difference over pooled standard deviation, with the zero-spread rule:
// when pooled_sd < 1e-6 the result is 0 if |mean_diff| < 1e-6, otherwise
// +/-10 in the direction of mean_diff.
double standardized_difference(double mean_diff, double pooled_sd);

// Cohen's d for one round using population variances. Throws kEmptyGroup if
// either group is empty.
double cohens_d_round(std::span<const double> liked, std::span<const double> disliked);

struct EffectSize {
  double d = 0.0;
  double mu_liked = 0.0;
  double mu_disliked = 0.0;

  bool operator==(const EffectSize&) const = default;
};

enum class RoundVarianceMode {
  // Average of the liked and disliked population variances.
  kPooledGroups,
  // Population variance of all annotated samples in the round.
  kAllSamples,
};

struct EngineConfig {
  RoundVarianceMode round_variance = RoundVarianceMode::kPooledGroups;
  // Also track odds ratios for the levels of ordinal features.
  bool ordinal_odds_ratios = false;

  bool operator==(const EngineConfig&) const = default;
};

nlohmann::json engine_config_to_json(const EngineConfig& cfg);
EngineConfig engine_config_from_json(const nlohmann::json& j);

// Running sums of w_t * {A_t, B_t, C_t, D_t} for one value.
struct WeightedCells {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  int rounds_seen = 0;

  bool operator==(const WeightedCells&) const = default;
};

// Weighted sufficient statistics of one annotation group.
struct GroupMoments {
  double sum_w = 0.0;
  double sum_wx = 0.0;
  double sum_wx2 = 0.0;

  void add(double w, double x) {
    sum_w += w;
    sum_wx += w * x;
    sum_wx2 += w * x * x;
  }
  double mean() const { return sum_wx / sum_w; }
  double variance() const;

  bool operator==(const GroupMoments&) const = default;
};

struct OrdinalMoments {
  GroupMoments liked;
  GroupMoments disliked;

  bool operator==(const OrdinalMoments&) const = default;
};

// Cumulative preference state. Its size is fixed by the repository at
// construction; ingesting rounds only updates sums in place.
// Weighted means and pooled effect size; nullopt when a group has no
// weight.
std::optional<EffectSize> effect_size_from_moments(const OrdinalMoments& m);

class PreferenceState {
 public:
  explicit PreferenceState(const FeatureRepository& repo, EngineConfig config = {});

  // Validates every profile, then folds the round into the sums. Liked
  // free-form texts always enter the pool; a degenerate round changes
  // nothing else. Returns whether the statistics were updated.
  bool ingest_round(const FeedbackRound& round, const FeatureRepository& repo);

  // Weighted cumulative odds ratio. A value that never received positive
  // weight returns 1.0. Throws kUnknownFeature / kUnknownValue.
  double cumulative_odds_ratio(std::string_view feature_id, std::string_view value_id) const;

  // Throws kInsufficientData when either group has zero total weight, and
  // kUnknownFeature for non-ordinal or unknown ids.
  EffectSize cumulative_effect_size(std::string_view feature_id) const;
  std::optional<EffectSize> try_cumulative_effect_size(std::string_view feature_id) const;

  const WeightedCells& weighted_cells(std::string_view feature_id, std::string_view value_id) const;
  const OrdinalMoments& ordinal_moments(std::string_view feature_id) const;

  const CreativeMaterialsPool& pool() const { return pool_; }
  int rounds_ingested() const { return rounds_ingested_; }
  const EngineConfig& config() const { return config_; }

  // Number of scalar accumulators (cells and moments); constant for a given
  // repository and config.
  std::size_t accumulator_count() const;

  nlohmann::json to_json() const;
  static PreferenceState from_json(const nlohmann::json& j, const FeatureRepository& repo);

  bool operator==(const PreferenceState&) const = default;

 private:
  using ValueCells = std::map<std::string, WeightedCells, std::less<>>;

  void ingest_odds_feature(const FeedbackRound& round, const FeatureSpec& spec,
                           std::size_t liked, std::size_t disliked);
  void ingest_ordinal_feature(const FeedbackRound& round, const FeatureSpec& spec);

  EngineConfig config_;
  std::map<std::string, ValueCells, std::less<>> odds_;
  std::map<std::string, OrdinalMoments, std::less<>> ordinal_;
  CreativeMaterialsPool pool_;
  int rounds_ingested_ = 0;
};

inline constexpr int kStateSchemaVersion = 1;

struct ValueOdds {
  std::string value;
  double odds_ratio = 1.0;
};

struct DiscreteFeatureReport {
  std::string feature;
  std::vector<ValueOdds> values;  // descending odds ratio
};

struct OrdinalFeatureReport {
  std::string feature;
  std::optional<EffectSize> effect;  // nullopt: insufficient data
  bool emphasized = false;
  std::string liked_level;  // level nearest mu_liked, when available
};

struct PreferenceSnapshot {
  int rounds_ingested = 0;
  std::size_t pool_size = 0;
  std::vector<DiscreteFeatureReport> discrete;
  std::vector<OrdinalFeatureReport> ordinal;
  std::vector<PoolEntry> pool_excerpt;

  nlohmann::json to_json() const;
};

inline constexpr double kDefaultEmphasisThreshold = 0.8;
inline constexpr std::size_t kSnapshotPoolExcerpt = 12;

// Read-only report: odds ratios per discrete value (descending, ties in
// declaration order) and effect sizes per ordinal feature.
PreferenceSnapshot preference_snapshot(const PreferenceState& state, const FeatureRepository& repo,
                                       double emphasis_threshold = kDefaultEmphasisThreshold);

}  // namespace prefloop

#endif  // PREFLOOP_PREFERENCE_ENGINE_H_
