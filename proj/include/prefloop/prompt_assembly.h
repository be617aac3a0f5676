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

#ifndef PREFLOOP_PROMPT_ASSEMBLY_H_
#define PREFLOOP_PROMPT_ASSEMBLY_H_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "prefloop/feature_repository.h"
#include "prefloop/preference_engine.h"
#include "prefloop/selection_sampling.h"

namespace prefloop {

struct PromptSpec {
  std::string id;
  std::string positive_prompt;
  std::string negative_prompt;
  SampledFeatureBundle bundle;
  std::string initial_prompt;

  bool operator==(const PromptSpec&) const = default;
};

nlohmann::json prompt_spec_to_json(const PromptSpec& spec);
PromptSpec prompt_spec_from_json(const nlohmann::json& j);

// A feature value rendered for prompt text, e.g. "artistic style: cartoon".
struct ValueDescriptor {
  std::string feature_id;
  std::string value_id;
  double odds_ratio = 1.0;
  std::string text;

  bool operator==(const ValueDescriptor&) const = default;
};

ValueDescriptor make_descriptor(const FeatureSpec& spec, const std::string& value_id,
                                double odds_ratio = 1.0);

inline constexpr double kDefaultNegativeThreshold = 0.5;
inline constexpr std::size_t kMaxNegativeTerms = 8;

// Discrete values with cumulative OR below the threshold, ascending by OR
// (ties in declaration order), at most 8. Throws kConfigError unless the
// threshold lies in (0,1).
std::vector<ValueDescriptor> derive_negative_terms(const PreferenceState& state,
                                                   const FeatureRepository& repo,
                                                   double or_neg_threshold = kDefaultNegativeThreshold);

// Drops negatives that name a value chosen in the bundle.
std::vector<ValueDescriptor> exclude_chosen(const std::vector<ValueDescriptor>& negatives,
                                            const SampledFeatureBundle& bundle);

// Content words of the initial prompt, lower-cased; these must all survive
// into any positive prompt.
std::vector<std::string> subject_tokens(std::string_view initial_prompt);
bool satisfies_hard_constraint(std::string_view initial_prompt, std::string_view positive_prompt);

// Instruction text for a language model that turns the bundle into prompts.
std::string build_assembly_instructions(const std::string& initial_prompt,
                                        const SampledFeatureBundle& bundle,
                                        const std::vector<ValueDescriptor>& negatives,
                                        const FeatureRepository& repo);

// Text-in, text-out model client.
class TextCompletionClient {
 public:
  virtual ~TextCompletionClient() = default;
  virtual std::string complete(const std::string& instructions) = 0;
};

// Asks the model for {"positive_prompt", "negative_prompt"}. A reply that
// cannot be parsed or drops the subject gets one corrective retry; after
// that the call fails with kAssemblyFormatError or kHardConstraintViolation.
PromptSpec assemble_prompt_vlm(const std::string& initial_prompt,
                               const SampledFeatureBundle& bundle,
                               const std::vector<ValueDescriptor>& negatives,
                               const FeatureRepository& repo, TextCompletionClient& client);

// Deterministic rendering: the initial prompt, then "<feature>: <value>"
// for each choice in repository order, then creative texts.
PromptSpec assemble_prompt_template(const std::string& initial_prompt,
                                    const SampledFeatureBundle& bundle,
                                    const std::vector<ValueDescriptor>& negatives,
                                    const FeatureRepository& repo);

// Offline stand-in for the assembly model: reads the instruction text back
// and answers with the template rendering as JSON.
class EchoCompletionClient : public TextCompletionClient {
 public:
  std::string complete(const std::string& instructions) override;
};

}  // namespace prefloop

#endif  // PREFLOOP_PROMPT_ASSEMBLY_H_
