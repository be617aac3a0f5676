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

#include "doctest.h"
#include "prefloop/error.h"
#include "prefloop/simulation.h"
#include "test_support.h"

using namespace prefloop;
using namespace prefloop::testing;
using nlohmann::json;

namespace {

TargetProfile pastel_cat() {
  TargetProfile t;
  t.discrete_targets = {{"subject_type", "animal"},
                        {"artistic_style", "illustration"},
                        {"color_palette", "pastel"}};
  t.ordinal_targets = {{"brightness", "high_key"}};
  return t;
}

SessionConfig sim_config(uint64_t seed) {
  SessionConfig cfg;
  cfg.initial_prompt = "a cat in a garden";
  cfg.candidates_per_round = 6;
  cfg.seed = seed;
  cfg.backend.p_noise = 0.0;
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

}  // namespace

TEST_SUITE("simulation") {
  TEST_CASE("utility and the like threshold") {
    const FeatureRepository& repo = default_repository();
    const TargetProfile t = pastel_cat();
    const auto all = make_profile(repo, "a",
                                  {{"subject_type", "animal"},
                                   {"artistic_style", "illustration"},
                                   {"color_palette", "pastel"},
                                   {"brightness", "high_key"}});
    const auto half = make_profile(repo, "b",
                                   {{"subject_type", "animal"}, {"brightness", "high_key"}});
    const auto three = make_profile(repo, "c",
                                    {{"subject_type", "animal"},
                                     {"artistic_style", "illustration"},
                                     {"brightness", "high_key"}});
    CHECK(target_utility(t, all) == 1.0);
    CHECK(target_utility(t, half) == 0.5);
    CHECK(target_utility(t, three) == 0.75);
    CHECK(target_utility(TargetProfile{}, half) == 1.0);

    Rng rng(1);
    const auto fb = simulated_feedback(t, {all, half, three}, rng);
    CHECK(fb.at("a") == Annotation::kLiked);
    CHECK(fb.at("b") == Annotation::kDisliked);
    CHECK(fb.at("c") == Annotation::kLiked);
  }

  TEST_CASE("noise flips exactly the draws below the rate") {
    const FeatureRepository& repo = default_repository();
    TargetProfile t = pastel_cat();
    Rng profile_rng(5);
    std::vector<ImageFeatureProfile> cands;
    for (int i = 0; i < 200; ++i) cands.push_back(random_profile(repo, "i" + std::to_string(i), profile_rng));

    Rng clean_rng(9);
    const auto clean = simulated_feedback(t, cands, clean_rng);
    t.noise_rate = 0.3;
    Rng noisy_rng(9);
    const auto noisy = simulated_feedback(t, cands, noisy_rng);
    Rng witness(9);
    int flips = 0;
    for (const auto& c : cands) {
      const bool flipped = witness.uniform() < 0.3;
      flips += flipped;
      CHECK((clean.at(c.image_id) != noisy.at(c.image_id)) == flipped);
    }
    CHECK(flips > 0);
    CHECK(clean_rng.next_u64() == noisy_rng.next_u64());
  }

  TEST_CASE("target profile validation") {
    const FeatureRepository& repo = default_repository();
    TargetProfile t = pastel_cat();
    CHECK(target_profile_from_json(json::parse(target_profile_to_json(t).dump()), repo) == t);
    t.like_threshold = 1.0;
    CHECK(code_of([&] { validate_target_profile(t, repo); }) == ErrorCode::kConfigError);
    t = pastel_cat();
    t.noise_rate = 1.0;
    CHECK(code_of([&] { validate_target_profile(t, repo); }) == ErrorCode::kConfigError);
    t = pastel_cat();
    t.discrete_targets["brightness"] = "dark";
    CHECK(code_of([&] { validate_target_profile(t, repo); }) == ErrorCode::kKindMismatch);
    t = pastel_cat();
    t.discrete_targets["subject_type"] = "robot";
    CHECK(code_of([&] { validate_target_profile(t, repo); }) == ErrorCode::kUnknownValue);
    t = pastel_cat();
    t.ordinal_targets["sparkle"] = "lots";
    CHECK(code_of([&] { validate_target_profile(t, repo); }) == ErrorCode::kUnknownFeature);
    CHECK(code_of([&] { target_profile_from_json(json{{"discrete_targets", 3}}, repo); }) ==
          ErrorCode::kParseError);
  }

  TEST_CASE("evaluation of a hand-built state") {
    const FeatureRepository& repo = tiny_repository();
    PreferenceState state(repo);
    FeedbackRound r;
    r.round_index = 1;
    r.entries = {entry(repo, "1", Annotation::kLiked, {{"component", "compA"}, {"brightness", "high_key"}}),
                 entry(repo, "2", Annotation::kLiked, {{"component", "compA"}, {"brightness", "bright"}}),
                 entry(repo, "3", Annotation::kDisliked, {{"component", "compB"}, {"brightness", "dark"}}),
                 entry(repo, "4", Annotation::kDisliked, {{"component", "neither"}, {"brightness", "dim"}})};
    state.ingest_round(r, repo);

    TargetProfile t;
    t.discrete_targets = {{"component", "compA"}};
    t.ordinal_targets = {{"brightness", "high_key"}};
    ConvergenceReport rep = evaluate_state(state, t, repo);
    REQUIRE(rep.discrete.size() == 1);
    CHECK(rep.discrete[0].top_value == "compA");
    CHECK(rep.discrete[0].top1_correct);
    REQUIRE(rep.ordinal.size() == 1);
    REQUIRE(rep.ordinal[0].effect.has_value());
    CHECK(rep.ordinal[0].sign_correct);
    CHECK(rep.ordinal[0].emphasis_passed);
    CHECK(rep.aggregate_accuracy == 1.0);

    t.discrete_targets = {{"component", "compB"}};
    t.ordinal_targets = {{"brightness", "dark"}};
    rep = evaluate_state(state, t, repo);
    CHECK_FALSE(rep.discrete[0].top1_correct);
    CHECK_FALSE(rep.ordinal[0].sign_correct);
    CHECK(rep.aggregate_accuracy == 0.0);

    // A fresh state ties every value: nothing is strictly on top.
    rep = evaluate_state(PreferenceState(repo), t, repo);
    CHECK_FALSE(rep.discrete[0].top1_correct);
    CHECK_FALSE(rep.ordinal[0].effect.has_value());
  }

  TEST_CASE("experiment is deterministic for a seed") {
    auto repo = shared_default_repository();
    ExperimentOptions opt;
    opt.rounds = 4;
    opt.trials = 3;
    const auto a = run_experiment(repo, pastel_cat(), sim_config(11), opt);
    const auto b = run_experiment(repo, pastel_cat(), sim_config(11), opt);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].to_json().dump() == b[i].to_json().dump());
      CHECK(a[i].rounds_used == 4);
      CHECK(a[i].seed == derive_seed(11, {i}));
    }
    CHECK(summarize(a).to_json().dump() == summarize(b).to_json().dump());
    const auto c = run_experiment(repo, pastel_cat(), sim_config(12), opt);
    CHECK(summarize(a).to_json().dump() != summarize(c).to_json().dump());
  }

  TEST_CASE("experiment options are validated") {
    auto repo = shared_default_repository();
    ExperimentOptions opt;
    opt.trials = 0;
    CHECK(code_of([&] { run_experiment(repo, pastel_cat(), sim_config(1), opt); }) ==
          ErrorCode::kConfigError);
    opt = {};
    opt.rounds = 0;
    CHECK(code_of([&] { run_experiment(repo, pastel_cat(), sim_config(1), opt); }) ==
          ErrorCode::kConfigError);
    SessionConfig http = sim_config(1);
    http.backend.kind = BackendKind::kHttp;
    http.backend.generation_url = "http://127.0.0.1:1";
    http.backend.extraction_url = "http://127.0.0.1:1";
    CHECK(code_of([&] { run_experiment(repo, pastel_cat(), http, {}); }) ==
          ErrorCode::kConfigError);
  }

  TEST_CASE("summary averages") {
    ConvergenceReport r1;
    r1.discrete = {DiscreteOutcome{"f", "x", "x", 3.0, true}, DiscreteOutcome{"g", "y", "z", 0.5, false}};
    r1.ordinal = {OrdinalOutcome{"o", "high", EffectSize{1.0, 0.8, 0.2}, true, true}};
    r1.aggregate_accuracy = 2.0 / 3.0;
    ConvergenceReport r2;
    r2.discrete = {DiscreteOutcome{"f", "x", "x", 3.0, true}, DiscreteOutcome{"g", "y", "y", 2.0, true}};
    r2.ordinal = {OrdinalOutcome{"o", "high", EffectSize{0.5, 0.6, 0.4}, true, false}};
    r2.aggregate_accuracy = 2.0 / 3.0;
    const ExperimentSummary s = summarize({r1, r2});
    CHECK(s.trials == 2);
    CHECK(s.mean_discrete_top1 == doctest::Approx(0.75));
    CHECK(s.mean_aggregate_accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(s.ordinal_pass_rate.at("o") == doctest::Approx(0.5));
    CHECK(s.ordinal_sign_rate.at("o") == doctest::Approx(1.0));
  }

  TEST_CASE("brute force oracle on trivial histories") {
    const FeatureRepository& repo = tiny_repository();
    const BruteForceStats empty = brute_force_state({}, repo);
    for (const auto& [value, r] : empty.odds_ratios.at("component")) CHECK(r == 1.0);
    CHECK_FALSE(empty.effects.at("brightness").has_value());

    FeedbackRound r;
    r.round_index = 1;
    r.entries = {entry(repo, "1", Annotation::kLiked, {{"component", "compA"}}),
                 entry(repo, "2", Annotation::kLiked, {{"component", "compA"}}),
                 entry(repo, "3", Annotation::kLiked, {{"component", "compA"}}),
                 entry(repo, "4", Annotation::kLiked, {{"component", "compB"}}),
                 entry(repo, "5", Annotation::kDisliked, {{"component", "compA"}}),
                 entry(repo, "6", Annotation::kDisliked, {{"component", "compB"}}),
                 entry(repo, "7", Annotation::kDisliked, {{"component", "compB"}}),
                 entry(repo, "8", Annotation::kDisliked, {{"component", "compB"}})};
    // One round: the cumulative ratio reduces to the per-round ratio.
    const BruteForceStats one = brute_force_state({r}, repo);
    CHECK(close_rel(one.odds_ratios.at("component").at("compA"), 9.0));
    CHECK(close_rel(one.odds_ratios.at("component").at("compB"), 1.0 / 9.0));
    CHECK(close_rel(one.odds_ratios.at("component").at("neither"), 1.0));
  }

  TEST_CASE("noise lowers accuracy (statistical)") {
    auto repo = shared_default_repository();
    ExperimentOptions opt;
    opt.rounds = 6;
    opt.trials = 30;
    std::vector<double> acc;
    for (double noise : {0.0, 0.4}) {
      TargetProfile t = pastel_cat();
      t.noise_rate = noise;
      acc.push_back(summarize(run_experiment(repo, t, sim_config(21), opt)).mean_aggregate_accuracy);
      MESSAGE("noise " << noise << " accuracy " << acc.back());
    }
    CHECK(acc[0] > acc[1]);
  }
}
