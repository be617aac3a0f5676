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

#include "prefloop/simulation.h"

#include <algorithm>
#include <cmath>

#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

namespace {

void check_target(const FeatureRepository& repo, const std::string& feature,
                  const std::string& value, FeatureKind expected) {
  const FeatureSpec& spec = repo.at(feature);
  if (spec.kind != expected) {
    throw Error(ErrorCode::kKindMismatch,
                "'" + feature + "' is not a " + std::string(feature_kind_name(expected)) +
                    " feature",
                feature);
  }
  if (!spec.has_value(value)) {
    throw Error(ErrorCode::kUnknownValue, "'" + value + "' is not a value of '" + feature + "'",
                feature);
  }
}

}  // namespace

void validate_target_profile(const TargetProfile& profile, const FeatureRepository& repo) {
  if (!(profile.like_threshold > 0.0 && profile.like_threshold < 1.0)) {
    throw Error(ErrorCode::kConfigError, "like_threshold must lie in (0,1)");
  }
  if (!(profile.noise_rate >= 0.0 && profile.noise_rate < 1.0)) {
    throw Error(ErrorCode::kConfigError, "noise_rate must lie in [0,1)");
  }
  for (const auto& [f, v] : profile.discrete_targets) check_target(repo, f, v, FeatureKind::kDiscrete);
  for (const auto& [f, v] : profile.ordinal_targets) check_target(repo, f, v, FeatureKind::kOrdinal);
}

json target_profile_to_json(const TargetProfile& profile) {
  return json{{"discrete_targets", profile.discrete_targets},
              {"ordinal_targets", profile.ordinal_targets},
              {"like_threshold", profile.like_threshold},
              {"noise_rate", profile.noise_rate}};
}

TargetProfile target_profile_from_json(const json& j, const FeatureRepository& repo) {
  TargetProfile p;
  try {
    p.discrete_targets =
        j.value("discrete_targets", std::map<std::string, std::string>{});
    p.ordinal_targets = j.value("ordinal_targets", std::map<std::string, std::string>{});
    p.like_threshold = j.value("like_threshold", p.like_threshold);
    p.noise_rate = j.value("noise_rate", p.noise_rate);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("target profile: ") + e.what());
  }
  validate_target_profile(p, repo);
  return p;
}

double target_utility(const TargetProfile& profile, const ImageFeatureProfile& candidate) {
  if (profile.target_count() == 0) return 1.0;
  int matched = 0;
  for (const auto& [f, v] : profile.discrete_targets) {
    auto it = candidate.discrete_values.find(f);
    matched += it != candidate.discrete_values.end() && it->second == v;
  }
  for (const auto& [f, v] : profile.ordinal_targets) {
    auto it = candidate.ordinal_values.find(f);
    matched += it != candidate.ordinal_values.end() && it->second == v;
  }
  return static_cast<double>(matched) / static_cast<double>(profile.target_count());
}

std::map<std::string, Annotation> simulated_feedback(
    const TargetProfile& profile, const std::vector<ImageFeatureProfile>& candidates, Rng& rng) {
  std::map<std::string, Annotation> out;
  for (const auto& c : candidates) {
    bool liked = target_utility(profile, c) >= profile.like_threshold;
    if (rng.uniform() < profile.noise_rate) liked = !liked;
    out[c.image_id] = liked ? Annotation::kLiked : Annotation::kDisliked;
  }
  return out;
}

ConvergenceReport evaluate_state(const PreferenceState& state, const TargetProfile& profile,
                                 const FeatureRepository& repo) {
  ConvergenceReport report;
  int correct = 0;
  for (const auto& [feature, target] : profile.discrete_targets) {
    const FeatureSpec& spec = repo.at(feature);
    DiscreteOutcome o{feature, target, spec.values.front(), 1.0, false};
    double best = -1.0;
    double best_other = -1.0;
    for (const auto& value : spec.values) {
      const double r = state.cumulative_odds_ratio(feature, value);
      if (r > best) {
        best = r;
        o.top_value = value;
      }
      if (value == target) {
        o.target_odds_ratio = r;
      } else {
        best_other = std::max(best_other, r);
      }
    }
    o.top1_correct = o.target_odds_ratio > best_other;
    correct += o.top1_correct;
    report.discrete.push_back(std::move(o));
  }
  for (const auto& [feature, target] : profile.ordinal_targets) {
    const FeatureSpec& spec = repo.at(feature);
    OrdinalOutcome o{feature, target, state.try_cumulative_effect_size(feature), false, false};
    if (o.effect) {
      const double x = normalize_ordinal_level(spec, target);
      const EffectSize& e = *o.effect;
      if (x > 0.5) {
        o.sign_correct = e.d > 0.0;
      } else if (x < 0.5) {
        o.sign_correct = e.d < 0.0;
      } else {
        // A middle target has no preferred direction; the liked mean must
        // sit closer to it than the disliked mean.
        o.sign_correct = std::abs(e.mu_liked - x) < std::abs(e.mu_disliked - x);
      }
      o.emphasis_passed = std::abs(e.d) >= kDefaultEmphasisThreshold;
    }
    correct += o.sign_correct && o.emphasis_passed;
    report.ordinal.push_back(std::move(o));
  }
  if (profile.target_count() > 0) {
    report.aggregate_accuracy =
        static_cast<double>(correct) / static_cast<double>(profile.target_count());
  }
  return report;
}

json ConvergenceReport::to_json() const {
  json d = json::array();
  for (const auto& o : discrete) {
    d.push_back({{"feature", o.feature},
                 {"target", o.target},
                 {"top_value", o.top_value},
                 {"target_odds_ratio", o.target_odds_ratio},
                 {"top1_correct", o.top1_correct}});
  }
  json ord = json::array();
  for (const auto& o : ordinal) {
    json item{{"feature", o.feature},
              {"target", o.target},
              {"sign_correct", o.sign_correct},
              {"emphasis_passed", o.emphasis_passed}};
    if (o.effect) {
      item["d"] = o.effect->d;
      item["mu_liked"] = o.effect->mu_liked;
      item["mu_disliked"] = o.effect->mu_disliked;
    } else {
      item["d"] = nullptr;
    }
    ord.push_back(std::move(item));
  }
  return json{{"trial", trial},
              {"seed", seed},
              {"rounds_used", rounds_used},
              {"initial_regenerations", initial_regenerations},
              {"discrete", std::move(d)},
              {"ordinal", std::move(ord)},
              {"aggregate_accuracy", aggregate_accuracy}};
}

std::vector<ConvergenceReport> run_experiment(std::shared_ptr<const FeatureRepository> repo,
                                              const TargetProfile& profile,
                                              const SessionConfig& session_cfg,
                                              const ExperimentOptions& options) {
  if (options.rounds < 1) throw Error(ErrorCode::kConfigError, "rounds must be at least 1");
  if (options.trials < 1) throw Error(ErrorCode::kConfigError, "trials must be at least 1");
  if (options.max_initial_regenerations < 0) {
    throw Error(ErrorCode::kConfigError, "max_initial_regenerations must be non-negative");
  }
  if (session_cfg.backend.kind != BackendKind::kMock) {
    throw Error(ErrorCode::kConfigError, "simulation requires the mock backend");
  }
  validate_session_config(session_cfg);
  validate_target_profile(profile, *repo);

  std::vector<ConvergenceReport> reports;
  reports.reserve(static_cast<std::size_t>(options.trials));
  for (int trial = 0; trial < options.trials; ++trial) {
    SessionConfig cfg = session_cfg;
    cfg.seed = derive_seed(session_cfg.seed, {static_cast<uint64_t>(trial)});
    cfg.max_rounds = std::max(cfg.max_rounds, options.rounds);
    Backends backends = make_mock_backends(repo, cfg.backend.p_noise);
    SessionRecord s = create_session("sim-" + std::to_string(trial), cfg, *repo, backends);
    Rng user(derive_seed(cfg.seed, {0x75736572}));

    auto profiles = [&s] {
      std::vector<ImageFeatureProfile> out;
      for (const auto& c : s.current_candidates) out.push_back(c.profile);
      return out;
    };
    auto worth_annotating = [&] {
      for (const auto& c : s.current_candidates) {
        if (target_utility(profile, c.profile) >= profile.like_threshold) return true;
      }
      return false;
    };

    int regenerations = 0;
    while (regenerations < options.max_initial_regenerations && !worth_annotating()) {
      regenerate_candidates(s, *repo, backends);
      ++regenerations;
    }
    for (int r = 0; r < options.rounds; ++r) {
      submit_feedback(s, simulated_feedback(profile, profiles(), user), *repo);
      if (r + 1 < options.rounds) advance_round(s, *repo, backends);
    }

    ConvergenceReport report = evaluate_state(s.state, profile, *repo);
    report.trial = trial;
    report.seed = cfg.seed;
    report.rounds_used = static_cast<int>(s.rounds.size());
    report.initial_regenerations = regenerations;
    reports.push_back(std::move(report));
  }
  return reports;
}

ExperimentSummary summarize(const std::vector<ConvergenceReport>& reports) {
  ExperimentSummary out;
  out.trials = static_cast<int>(reports.size());
  if (reports.empty()) return out;
  double top1 = 0.0;
  std::size_t top1_n = 0;
  std::map<std::string, int> pass;
  std::map<std::string, int> sign;
  for (const auto& r : reports) {
    out.mean_aggregate_accuracy += r.aggregate_accuracy;
    for (const auto& o : r.discrete) {
      top1 += o.top1_correct;
      ++top1_n;
    }
    for (const auto& o : r.ordinal) {
      pass[o.feature] += o.sign_correct && o.emphasis_passed;
      sign[o.feature] += o.sign_correct;
    }
  }
  const double n = static_cast<double>(reports.size());
  out.mean_aggregate_accuracy /= n;
  out.mean_discrete_top1 = top1_n ? top1 / static_cast<double>(top1_n) : 1.0;
  for (const auto& [f, k] : pass) out.ordinal_pass_rate[f] = k / n;
  for (const auto& [f, k] : sign) out.ordinal_sign_rate[f] = k / n;
  return out;
}

json ExperimentSummary::to_json() const {
  return json{{"trials", trials},
              {"mean_aggregate_accuracy", mean_aggregate_accuracy},
              {"mean_discrete_top1", mean_discrete_top1},
              {"ordinal_pass_rate", ordinal_pass_rate},
              {"ordinal_sign_rate", ordinal_sign_rate}};
}

// Deliberately shares no code with the incremental engine beyond the
// repository lookups and the published thresholds.
namespace {

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h / std::log(2.0);
}

double two_pass_variance(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size());
}

struct WeightedSample {
  double w;
  double x;
};

void weighted_mean_var(const std::vector<WeightedSample>& s, double& mean, double& var) {
  double sw = 0.0;
  double swx = 0.0;
  for (const auto& p : s) {
    sw += p.w;
    swx += p.w * p.x;
  }
  mean = swx / sw;
  double ss = 0.0;
  for (const auto& p : s) ss += p.w * (p.x - mean) * (p.x - mean);
  var = ss / sw;
}

}  // namespace

BruteForceStats brute_force_state(const std::vector<FeedbackRound>& rounds,
                                  const FeatureRepository& repo, const EngineConfig& config) {
  BruteForceStats out;
  for (const auto& round : rounds) {
    for (const auto& e : round.entries) validate_profile(e.profile, repo);
  }
  auto informative = [](const FeedbackRound& r) {
    bool liked = false;
    bool disliked = false;
    for (const auto& e : r.entries) {
      liked |= e.annotation == Annotation::kLiked;
      disliked |= e.annotation == Annotation::kDisliked;
    }
    return liked && disliked;
  };

  for (const FeatureSpec& spec : repo.features()) {
    const bool tracks_odds =
        spec.kind == FeatureKind::kDiscrete ||
        (spec.kind == FeatureKind::kOrdinal && config.ordinal_odds_ratios);
    if (tracks_odds) {
      for (const auto& value : spec.values) {
        double a = 0, b = 0, c = 0, d = 0;
        for (const auto& round : rounds) {
          if (!informative(round)) continue;
          double n_a = 0, n_b = 0, n_c = 0, n_d = 0;
          for (const auto& e : round.entries) {
            if (e.annotation == Annotation::kUnlabeled) continue;
            const bool has = *e.profile.value_of(spec.id) == value;
            const bool liked = e.annotation == Annotation::kLiked;
            (has ? (liked ? n_a : n_b) : (liked ? n_c : n_d)) += 1.0;
          }
          const double w = binary_entropy((n_a + n_b) / (n_a + n_b + n_c + n_d));
          if (w <= 0.0) continue;
          a += w * n_a;
          b += w * n_b;
          c += w * n_c;
          d += w * n_d;
        }
        double r = 1.0;
        if (a + b + c + d >= kEmptyCellThreshold) {
          const double h = (a < kEmptyCellThreshold || b < kEmptyCellThreshold ||
                            c < kEmptyCellThreshold || d < kEmptyCellThreshold)
                               ? kHaldaneCorrection
                               : 0.0;
          r = (a + h) * (d + h) / ((b + h) * (c + h));
        }
        out.odds_ratios[spec.id][value] = r;
      }
    }
    if (spec.kind != FeatureKind::kOrdinal) continue;

    std::vector<WeightedSample> liked_all;
    std::vector<WeightedSample> disliked_all;
    const double top = static_cast<double>(spec.values.size() - 1);
    for (const auto& round : rounds) {
      if (!informative(round)) continue;
      std::vector<double> lx;
      std::vector<double> dx;
      for (const auto& e : round.entries) {
        if (e.annotation == Annotation::kUnlabeled) continue;
        const double x = static_cast<double>(*spec.value_index(*e.profile.value_of(spec.id))) / top;
        (e.annotation == Annotation::kLiked ? lx : dx).push_back(x);
      }
      double var = 0.0;
      if (config.round_variance == RoundVarianceMode::kPooledGroups) {
        var = 0.5 * (two_pass_variance(lx) + two_pass_variance(dx));
      } else {
        std::vector<double> all = lx;
        all.insert(all.end(), dx.begin(), dx.end());
        var = two_pass_variance(all);
      }
      const double w = std::min(var / kMaxUnitVariance, 1.0);
      if (w <= 0.0) continue;
      for (double x : lx) liked_all.push_back({w, x});
      for (double x : dx) disliked_all.push_back({w, x});
    }
    if (liked_all.empty() || disliked_all.empty()) {
      out.effects[spec.id] = std::nullopt;
      continue;
    }
    EffectSize es;
    double var_l = 0.0;
    double var_d = 0.0;
    weighted_mean_var(liked_all, es.mu_liked, var_l);
    weighted_mean_var(disliked_all, es.mu_disliked, var_d);
    const double diff = es.mu_liked - es.mu_disliked;
    const double sd = std::sqrt(0.5 * (var_l + var_d));
    if (sd < kEffectSizeEpsilon) {
      es.d = std::abs(diff) < kEffectSizeEpsilon ? 0.0 : std::copysign(kEffectSizeClamp, diff);
    } else {
      es.d = diff / sd;
    }
    out.effects[spec.id] = es;
  }
  return out;
}

}  // namespace prefloop
