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

#include "prefloop/preference_engine.h"

#include <algorithm>
#include <cmath>

#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

std::string_view annotation_name(Annotation a) {
  switch (a) {
    case Annotation::kLiked: return "liked";
    case Annotation::kDisliked: return "disliked";
    case Annotation::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::optional<Annotation> parse_annotation(std::string_view name) {
  if (name == "liked") return Annotation::kLiked;
  if (name == "disliked") return Annotation::kDisliked;
  if (name == "unlabeled") return Annotation::kUnlabeled;
  return std::nullopt;
}

std::size_t FeedbackRound::count(Annotation a) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [a](const FeedbackEntry& e) { return e.annotation == a; }));
}

json feedback_round_to_json(const FeedbackRound& round) {
  json entries = json::array();
  for (const auto& e : round.entries) {
    entries.push_back({{"annotation", annotation_name(e.annotation)},
                       {"profile", profile_to_json(e.profile)}});
  }
  return json{{"round_index", round.round_index}, {"entries", std::move(entries)}};
}

FeedbackRound feedback_round_from_json(const json& j) {
  FeedbackRound round;
  round.round_index = j.at("round_index").get<int>();
  for (const auto& e : j.at("entries")) {
    auto a = parse_annotation(e.at("annotation").get<std::string>());
    if (!a) throw Error(ErrorCode::kParseError, "unknown annotation in round document");
    round.entries.push_back(FeedbackEntry{profile_from_json(e.at("profile")), *a});
  }
  return round;
}

ContingencyCells round_contingency(const FeedbackRound& round, const FeatureSpec& spec,
                                   std::string_view value_id) {
  if (spec.kind == FeatureKind::kFreeForm) {
    throw Error(ErrorCode::kKindMismatch,
                "free-form feature '" + spec.id + "' has no contingency table", spec.id);
  }
  if (!spec.has_value(value_id)) {
    throw Error(ErrorCode::kUnknownValue,
                "'" + std::string(value_id) + "' is not a value of '" + spec.id + "'", spec.id);
  }
  ContingencyCells cells;
  for (const auto& entry : round.entries) {
    if (entry.annotation == Annotation::kUnlabeled) continue;
    const std::string* v = entry.profile.value_of(spec.id);
    const bool present = v != nullptr && *v == value_id;
    const bool liked = entry.annotation == Annotation::kLiked;
    if (liked) {
      (present ? cells.a : cells.c)++;
    } else {
      (present ? cells.b : cells.d)++;
    }
  }
  return cells;
}

double round_odds_ratio(const ContingencyCells& cells) {
  const bool has_zero = cells.a == 0 || cells.b == 0 || cells.c == 0 || cells.d == 0;
  const double h = has_zero ? kHaldaneCorrection : 0.0;
  return ((cells.a + h) * (cells.d + h)) / ((cells.b + h) * (cells.c + h));
}

double entropy_weight(double e) {
  if (!(e >= 0.0 && e <= 1.0)) {
    throw Error(ErrorCode::kDomainError, "occurrence rate must lie in [0,1]");
  }
  auto term = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  return term(e) + term(1.0 - e);
}

double ordinal_round_weight(double round_variance) {
  return std::min(std::max(round_variance, 0.0) / kMaxUnitVariance, 1.0);
}

double standardized_difference(double mean_diff, double pooled_sd) {
  if (pooled_sd < kEffectSizeEpsilon) {
    if (std::abs(mean_diff) < kEffectSizeEpsilon) return 0.0;
    return mean_diff > 0 ? kEffectSizeClamp : -kEffectSizeClamp;
  }
  return mean_diff / pooled_sd;
}

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

Moments population_moments(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(xs.size());
  return m;
}

}  // namespace

double cohens_d_round(std::span<const double> liked, std::span<const double> disliked) {
  if (liked.empty() || disliked.empty()) {
    throw Error(ErrorCode::kEmptyGroup, "effect size needs both liked and disliked samples");
  }
  const Moments l = population_moments(liked);
  const Moments d = population_moments(disliked);
  return standardized_difference(l.mean - d.mean, std::sqrt((l.variance + d.variance) / 2.0));
}

double GroupMoments::variance() const {
  const double mu = mean();
  return std::max(sum_wx2 / sum_w - mu * mu, 0.0);
}

json engine_config_to_json(const EngineConfig& cfg) {
  return json{{"round_variance", cfg.round_variance == RoundVarianceMode::kPooledGroups
                                     ? "pooled_groups"
                                     : "all_samples"},
              {"ordinal_odds_ratios", cfg.ordinal_odds_ratios}};
}

EngineConfig engine_config_from_json(const json& j) {
  EngineConfig cfg;
  const std::string mode = j.value("round_variance", std::string("pooled_groups"));
  if (mode == "pooled_groups") {
    cfg.round_variance = RoundVarianceMode::kPooledGroups;
  } else if (mode == "all_samples") {
    cfg.round_variance = RoundVarianceMode::kAllSamples;
  } else {
    throw Error(ErrorCode::kConfigError, "round_variance must be pooled_groups or all_samples");
  }
  cfg.ordinal_odds_ratios = j.value("ordinal_odds_ratios", false);
  return cfg;
}

PreferenceState::PreferenceState(const FeatureRepository& repo, EngineConfig config)
    : config_(config) {
  for (const FeatureSpec& spec : repo.features()) {
    const bool tracks_odds = spec.kind == FeatureKind::kDiscrete ||
                             (spec.kind == FeatureKind::kOrdinal && config_.ordinal_odds_ratios);
    if (tracks_odds) {
      ValueCells& cells = odds_[spec.id];
      for (const auto& v : spec.values) cells.emplace(v, WeightedCells{});
    }
    if (spec.kind == FeatureKind::kOrdinal) ordinal_.emplace(spec.id, OrdinalMoments{});
  }
}

bool PreferenceState::ingest_round(const FeedbackRound& round, const FeatureRepository& repo) {
  for (const auto& entry : round.entries) validate_profile(entry.profile, repo);

  for (const auto& entry : round.entries) {
    if (entry.annotation != Annotation::kLiked) continue;
    for (const auto& [feature_id, texts] : entry.profile.freeform_values) {
      const FeatureSpec& spec = repo.at(feature_id);
      if (!spec.pool_category) continue;
      for (const auto& text : texts) pool_.add(*spec.pool_category, text, round.round_index);
    }
  }

  const std::size_t liked = round.count(Annotation::kLiked);
  const std::size_t disliked = round.count(Annotation::kDisliked);
  if (liked == 0 || disliked == 0) return false;

  for (const FeatureSpec& spec : repo.features()) {
    if (odds_.contains(spec.id)) ingest_odds_feature(round, spec, liked, disliked);
    if (spec.kind == FeatureKind::kOrdinal) ingest_ordinal_feature(round, spec);
  }
  ++rounds_ingested_;
  return true;
}

void PreferenceState::ingest_odds_feature(const FeedbackRound& round, const FeatureSpec& spec,
                                          std::size_t liked, std::size_t disliked) {
  std::vector<int> liked_with(spec.values.size(), 0);
  std::vector<int> disliked_with(spec.values.size(), 0);
  for (const auto& entry : round.entries) {
    if (entry.annotation == Annotation::kUnlabeled) continue;
    const std::size_t idx = *spec.value_index(*entry.profile.value_of(spec.id));
    (entry.annotation == Annotation::kLiked ? liked_with : disliked_with)[idx]++;
  }
  const double annotated = static_cast<double>(liked + disliked);
  ValueCells& cells = odds_.find(spec.id)->second;
  for (std::size_t k = 0; k < spec.values.size(); ++k) {
    const int a = liked_with[k];
    const int b = disliked_with[k];
    const int c = static_cast<int>(liked) - a;
    const int d = static_cast<int>(disliked) - b;
    const double w = entropy_weight((a + b) / annotated);
    if (w <= 0.0) continue;
    WeightedCells& acc = cells.find(spec.values[k])->second;
    acc.a += w * a;
    acc.b += w * b;
    acc.c += w * c;
    acc.d += w * d;
    ++acc.rounds_seen;
  }
}

void PreferenceState::ingest_ordinal_feature(const FeedbackRound& round, const FeatureSpec& spec) {
  std::vector<double> liked_x;
  std::vector<double> disliked_x;
  for (const auto& entry : round.entries) {
    if (entry.annotation == Annotation::kUnlabeled) continue;
    const double x = normalize_ordinal_level(spec, *entry.profile.value_of(spec.id));
    (entry.annotation == Annotation::kLiked ? liked_x : disliked_x).push_back(x);
  }
  double variance = 0.0;
  if (config_.round_variance == RoundVarianceMode::kPooledGroups) {
    variance = (population_moments(liked_x).variance + population_moments(disliked_x).variance) / 2.0;
  } else {
    std::vector<double> all = liked_x;
    all.insert(all.end(), disliked_x.begin(), disliked_x.end());
    variance = population_moments(all).variance;
  }
  const double w = ordinal_round_weight(variance);
  if (w <= 0.0) return;
  OrdinalMoments& m = ordinal_.find(spec.id)->second;
  for (double x : liked_x) m.liked.add(w, x);
  for (double x : disliked_x) m.disliked.add(w, x);
}

const WeightedCells& PreferenceState::weighted_cells(std::string_view feature_id,
                                                     std::string_view value_id) const {
  auto f = odds_.find(feature_id);
  if (f == odds_.end()) {
    throw Error(ErrorCode::kUnknownFeature,
                "no odds ratios tracked for '" + std::string(feature_id) + "'",
                std::string(feature_id));
  }
  auto v = f->second.find(value_id);
  if (v == f->second.end()) {
    throw Error(ErrorCode::kUnknownValue,
                "'" + std::string(value_id) + "' is not a value of '" + std::string(feature_id) + "'",
                std::string(feature_id));
  }
  return v->second;
}

double PreferenceState::cumulative_odds_ratio(std::string_view feature_id,
                                              std::string_view value_id) const {
  const WeightedCells& s = weighted_cells(feature_id, value_id);
  if (s.a + s.b + s.c + s.d < kEmptyCellThreshold) return 1.0;
  const bool has_empty = std::min({s.a, s.b, s.c, s.d}) < kEmptyCellThreshold;
  const double h = has_empty ? kHaldaneCorrection : 0.0;
  return ((s.a + h) * (s.d + h)) / ((s.b + h) * (s.c + h));
}

const OrdinalMoments& PreferenceState::ordinal_moments(std::string_view feature_id) const {
  auto it = ordinal_.find(feature_id);
  if (it == ordinal_.end()) {
    throw Error(ErrorCode::kUnknownFeature,
                "'" + std::string(feature_id) + "' is not an ordinal feature",
                std::string(feature_id));
  }
  return it->second;
}

std::optional<EffectSize> effect_size_from_moments(const OrdinalMoments& m) {
  if (m.liked.sum_w <= 0.0 || m.disliked.sum_w <= 0.0) return std::nullopt;
  EffectSize out;
  out.mu_liked = m.liked.mean();
  out.mu_disliked = m.disliked.mean();
  const double pooled_sd = std::sqrt((m.liked.variance() + m.disliked.variance()) / 2.0);
  out.d = standardized_difference(out.mu_liked - out.mu_disliked, pooled_sd);
  return out;
}

std::optional<EffectSize> PreferenceState::try_cumulative_effect_size(
    std::string_view feature_id) const {
  return effect_size_from_moments(ordinal_moments(feature_id));
}

EffectSize PreferenceState::cumulative_effect_size(std::string_view feature_id) const {
  if (auto e = try_cumulative_effect_size(feature_id)) return *e;
  throw Error(ErrorCode::kInsufficientData,
              "no weighted liked/disliked samples yet for '" + std::string(feature_id) + "'",
              std::string(feature_id));
}

std::size_t PreferenceState::accumulator_count() const {
  std::size_t n = 0;
  for (const auto& [_, cells] : odds_) n += 4 * cells.size();
  return n + 6 * ordinal_.size();
}

json PreferenceState::to_json() const {
  json odds = json::object();
  for (const auto& [feature, cells] : odds_) {
    json values = json::object();
    for (const auto& [value, s] : cells) values[value] = {s.a, s.b, s.c, s.d, s.rounds_seen};
    odds[feature] = std::move(values);
  }
  json ordinal = json::object();
  for (const auto& [feature, m] : ordinal_) {
    ordinal[feature] = {
        {"liked", {m.liked.sum_w, m.liked.sum_wx, m.liked.sum_wx2}},
        {"disliked", {m.disliked.sum_w, m.disliked.sum_wx, m.disliked.sum_wx2}}};
  }
  return json{{"schema_version", kStateSchemaVersion},
              {"config", engine_config_to_json(config_)},
              {"rounds_ingested", rounds_ingested_},
              {"odds", std::move(odds)},
              {"ordinal", std::move(ordinal)},
              {"pool", pool_.to_json()}};
}

PreferenceState PreferenceState::from_json(const json& j, const FeatureRepository& repo) {
  const int version = j.at("schema_version").get<int>();
  if (version > kStateSchemaVersion) {
    throw Error(ErrorCode::kSchemaVersionMismatch,
                "preference state schema " + std::to_string(version) + " is newer than supported " +
                    std::to_string(kStateSchemaVersion));
  }
  PreferenceState state(repo, engine_config_from_json(j.at("config")));
  state.rounds_ingested_ = j.at("rounds_ingested").get<int>();
  for (const auto& [feature, values] : j.at("odds").items()) {
    auto f = state.odds_.find(feature);
    if (f == state.odds_.end()) {
      throw Error(ErrorCode::kParseError, "state tracks unknown feature '" + feature + "'", feature);
    }
    for (const auto& [value, arr] : values.items()) {
      auto v = f->second.find(value);
      if (v == f->second.end()) {
        throw Error(ErrorCode::kParseError, "state tracks unknown value '" + value + "'", feature);
      }
      v->second = WeightedCells{arr.at(0).get<double>(), arr.at(1).get<double>(),
                                arr.at(2).get<double>(), arr.at(3).get<double>(),
                                arr.at(4).get<int>()};
    }
  }
  auto read_moments = [](const json& a) {
    return GroupMoments{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
  };
  for (const auto& [feature, m] : j.at("ordinal").items()) {
    auto it = state.ordinal_.find(feature);
    if (it == state.ordinal_.end()) {
      throw Error(ErrorCode::kParseError, "state tracks unknown ordinal '" + feature + "'", feature);
    }
    it->second.liked = read_moments(m.at("liked"));
    it->second.disliked = read_moments(m.at("disliked"));
  }
  state.pool_ = CreativeMaterialsPool::from_json(j.at("pool"));
  return state;
}

PreferenceSnapshot preference_snapshot(const PreferenceState& state, const FeatureRepository& repo,
                                       double emphasis_threshold) {
  PreferenceSnapshot snap;
  snap.rounds_ingested = state.rounds_ingested();
  snap.pool_size = state.pool().size();
  for (const FeatureSpec& spec : repo.features()) {
    const bool tracks_odds = spec.kind == FeatureKind::kDiscrete ||
                             (spec.kind == FeatureKind::kOrdinal &&
                              state.config().ordinal_odds_ratios);
    if (tracks_odds) {
      DiscreteFeatureReport report{spec.id, {}};
      for (const auto& v : spec.values) {
        report.values.push_back({v, state.cumulative_odds_ratio(spec.id, v)});
      }
      std::stable_sort(report.values.begin(), report.values.end(),
                       [](const ValueOdds& x, const ValueOdds& y) {
                         return x.odds_ratio > y.odds_ratio;
                       });
      snap.discrete.push_back(std::move(report));
    }
    if (spec.kind == FeatureKind::kOrdinal) {
      OrdinalFeatureReport report{spec.id, state.try_cumulative_effect_size(spec.id), false, {}};
      if (report.effect) {
        report.emphasized = std::abs(report.effect->d) >= emphasis_threshold;
        report.liked_level =
            nearest_level(spec, std::clamp(report.effect->mu_liked, 0.0, 1.0));
      }
      snap.ordinal.push_back(std::move(report));
    }
  }
  const auto& entries = state.pool().entries();
  const std::size_t n = std::min(entries.size(), kSnapshotPoolExcerpt);
  snap.pool_excerpt.assign(entries.end() - static_cast<std::ptrdiff_t>(n), entries.end());
  return snap;
}

json PreferenceSnapshot::to_json() const {
  json discrete_json = json::array();
  for (const auto& r : discrete) {
    json values = json::array();
    for (const auto& v : r.values) values.push_back({{"value", v.value}, {"odds_ratio", v.odds_ratio}});
    discrete_json.push_back({{"feature", r.feature}, {"values", std::move(values)}});
  }
  json ordinal_json = json::array();
  for (const auto& r : ordinal) {
    json item{{"feature", r.feature}};
    if (r.effect) {
      item["status"] = "ok";
      item["d"] = r.effect->d;
      item["mu_liked"] = r.effect->mu_liked;
      item["mu_disliked"] = r.effect->mu_disliked;
      item["emphasized"] = r.emphasized;
      item["liked_level"] = r.liked_level;
    } else {
      item["status"] = "insufficient_data";
    }
    ordinal_json.push_back(std::move(item));
  }
  json pool = json::array();
  for (const auto& e : pool_excerpt) {
    pool.push_back({{"category", pool_category_name(e.category)}, {"text", e.text}});
  }
  return json{{"rounds_ingested", rounds_ingested},
              {"pool_size", pool_size},
              {"discrete", std::move(discrete_json)},
              {"ordinal", std::move(ordinal_json)},
              {"pool_excerpt", std::move(pool)}};
}

}  // namespace prefloop
