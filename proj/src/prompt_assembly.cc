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

#include "prefloop/prompt_assembly.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

json prompt_spec_to_json(const PromptSpec& spec) {
  return json{{"id", spec.id},
              {"positive_prompt", spec.positive_prompt},
              {"negative_prompt", spec.negative_prompt},
              {"bundle", bundle_to_json(spec.bundle)},
              {"initial_prompt", spec.initial_prompt}};
}

PromptSpec prompt_spec_from_json(const json& j) {
  return PromptSpec{j.at("id").get<std::string>(), j.at("positive_prompt").get<std::string>(),
                    j.at("negative_prompt").get<std::string>(), bundle_from_json(j.at("bundle")),
                    j.at("initial_prompt").get<std::string>()};
}

ValueDescriptor make_descriptor(const FeatureSpec& spec, const std::string& value_id,
                                double odds_ratio) {
  return ValueDescriptor{spec.id, value_id, odds_ratio,
                         spec.display_name + ": " + display_name_from_id(value_id)};
}

std::vector<ValueDescriptor> derive_negative_terms(const PreferenceState& state,
                                                   const FeatureRepository& repo,
                                                   double or_neg_threshold) {
  if (!(or_neg_threshold > 0.0 && or_neg_threshold < 1.0)) {
    throw Error(ErrorCode::kConfigError, "negative-term threshold must lie in (0,1)");
  }
  std::vector<ValueDescriptor> out;
  for (const FeatureSpec& spec : repo.features()) {
    if (spec.kind != FeatureKind::kDiscrete) continue;
    for (const auto& v : spec.values) {
      const double odds = state.cumulative_odds_ratio(spec.id, v);
      if (odds < or_neg_threshold) out.push_back(make_descriptor(spec, v, odds));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ValueDescriptor& a, const ValueDescriptor& b) {
    return a.odds_ratio < b.odds_ratio;
  });
  if (out.size() > kMaxNegativeTerms) out.resize(kMaxNegativeTerms);
  return out;
}

std::vector<ValueDescriptor> exclude_chosen(const std::vector<ValueDescriptor>& negatives,
                                            const SampledFeatureBundle& bundle) {
  std::vector<ValueDescriptor> out;
  for (const auto& n : negatives) {
    const std::string* chosen = bundle.choice_for(n.feature_id);
    if (chosen && *chosen == n.value_id) continue;
    out.push_back(n);
  }
  return out;
}

namespace {

const std::set<std::string, std::less<>> kStopwords = {
    "a", "an", "the", "of", "with", "and", "or", "in", "on", "at", "for", "to", "by", "from", "is"};

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Soft-constraint descriptors in repository declaration order.
std::vector<std::string> soft_descriptors(const SampledFeatureBundle& bundle,
                                          const FeatureRepository& repo) {
  std::vector<std::string> out;
  for (const FeatureSpec& spec : repo.features()) {
    if (const std::string* v = bundle.choice_for(spec.id)) {
      out.push_back(make_descriptor(spec, *v).text);
    }
  }
  return out;
}

std::vector<std::string> negative_texts(const std::vector<ValueDescriptor>& negatives,
                                        const SampledFeatureBundle& bundle) {
  std::vector<std::string> out;
  for (const auto& n : exclude_chosen(negatives, bundle)) out.push_back(n.text);
  return out;
}

std::string default_prompt_id(const SampledFeatureBundle& bundle) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "prompt-%016llx",
                static_cast<unsigned long long>(bundle.rng_seed));
  return buf;
}

constexpr std::string_view kInitialPromptLabel = "Initial prompt: ";
constexpr std::string_view kSoftHeader = "SOFT CONSTRAINTS";
constexpr std::string_view kCreativeHeader = "CREATIVE REFERENCES";
constexpr std::string_view kExclusionHeader = "EXCLUSIONS";
constexpr std::string_view kFormatHeader = "OUTPUT FORMAT";

}  // namespace

std::vector<std::string> subject_tokens(std::string_view initial_prompt) {
  std::vector<std::string> all = tokenize(initial_prompt);
  std::vector<std::string> content;
  for (const auto& t : all) {
    if (!kStopwords.contains(t)) content.push_back(t);
  }
  return content.empty() ? all : content;
}

bool satisfies_hard_constraint(std::string_view initial_prompt, std::string_view positive_prompt) {
  const std::vector<std::string> have = tokenize(positive_prompt);
  const std::set<std::string, std::less<>> present(have.begin(), have.end());
  for (const auto& t : subject_tokens(initial_prompt)) {
    if (!present.contains(t)) return false;
  }
  return true;
}

std::string build_assembly_instructions(const std::string& initial_prompt,
                                        const SampledFeatureBundle& bundle,
                                        const std::vector<ValueDescriptor>& negatives,
                                        const FeatureRepository& repo) {
  std::ostringstream out;
  out << "You write prompts for a text-to-image diffusion model.\n\n";
  out << "HARD CONSTRAINT\n"
      << kInitialPromptLabel << initial_prompt << "\n"
      << "This is the inviolable core of the request. The positive prompt must satisfy it "
         "verbatim in intent and keep every subject word of it.\n\n";

  const std::vector<std::string> soft = soft_descriptors(bundle, repo);
  if (!soft.empty()) {
    out << kSoftHeader << "\n"
        << "Translate these feature values into natural-language modifiers. Incorporate as many "
           "compatible feature values as possible, favoring semantic coherence over forcing "
           "every value in.\n";
    for (const auto& s : soft) out << "- " << s << "\n";
    out << "\n";
  }

  if (!bundle.creative_refs.empty()) {
    out << kCreativeHeader << "\n"
        << "Descriptions from images the user liked. Use them selectively to enrich detail.\n";
    for (const auto& c : bundle.creative_refs) out << "- " << c << "\n";
    out << "\n";
  }

  const std::vector<std::string> excluded = negative_texts(negatives, bundle);
  if (!excluded.empty()) {
    out << kExclusionHeader << "\n"
        << "Visual elements the user rejected. Express them in the negative prompt.\n";
    for (const auto& n : excluded) out << "- " << n << "\n";
    out << "\n";
  }

  out << kFormatHeader << "\n"
      << "Reply with a single JSON object containing exactly two string fields, "
         "\"positive_prompt\" and \"negative_prompt\", and nothing else.\n";
  return out.str();
}

namespace {

struct AssemblyReply {
  std::string positive;
  std::string negative;
};

AssemblyReply parse_assembly_reply(const std::string& raw) {
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error&) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      throw Error(ErrorCode::kAssemblyFormatError, "assembly reply contains no JSON object");
    }
    try {
      doc = json::parse(raw.substr(open, close - open + 1));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kAssemblyFormatError, std::string("assembly reply: ") + e.what());
    }
  }
  if (!doc.is_object()) throw Error(ErrorCode::kAssemblyFormatError, "assembly reply is not an object");
  auto pos = doc.find("positive_prompt");
  if (pos == doc.end() || !pos->is_string() || pos->get<std::string>().empty()) {
    throw Error(ErrorCode::kAssemblyFormatError, "assembly reply lacks positive_prompt");
  }
  AssemblyReply reply{pos->get<std::string>(), {}};
  if (auto neg = doc.find("negative_prompt"); neg != doc.end() && !neg->is_null()) {
    if (!neg->is_string()) {
      throw Error(ErrorCode::kAssemblyFormatError, "negative_prompt must be a string");
    }
    reply.negative = neg->get<std::string>();
  }
  return reply;
}

}  // namespace

PromptSpec assemble_prompt_vlm(const std::string& initial_prompt,
                               const SampledFeatureBundle& bundle,
                               const std::vector<ValueDescriptor>& negatives,
                               const FeatureRepository& repo, TextCompletionClient& client) {
  const std::string instructions =
      build_assembly_instructions(initial_prompt, bundle, negatives, repo);
  std::string request = instructions;
  for (int attempt = 0;; ++attempt) {
    try {
      AssemblyReply reply = parse_assembly_reply(client.complete(request));
      if (!satisfies_hard_constraint(initial_prompt, reply.positive)) {
        throw Error(ErrorCode::kHardConstraintViolation,
                    "positive_prompt drops subject words of the initial prompt");
      }
      return PromptSpec{default_prompt_id(bundle), std::move(reply.positive),
                        std::move(reply.negative), bundle, initial_prompt};
    } catch (const Error& e) {
      const bool retryable = e.code() == ErrorCode::kAssemblyFormatError ||
                             e.code() == ErrorCode::kHardConstraintViolation;
      if (!retryable || attempt >= 1) throw;
      request = instructions + "\nYOUR PREVIOUS REPLY WAS REJECTED: " + e.what() +
                ". Reply again following the OUTPUT FORMAT and the HARD CONSTRAINT exactly.\n";
    }
  }
}

PromptSpec assemble_prompt_template(const std::string& initial_prompt,
                                    const SampledFeatureBundle& bundle,
                                    const std::vector<ValueDescriptor>& negatives,
                                    const FeatureRepository& repo) {
  std::vector<std::string> parts{initial_prompt};
  for (auto& s : soft_descriptors(bundle, repo)) parts.push_back(std::move(s));
  for (const auto& c : bundle.creative_refs) parts.push_back(c);
  return PromptSpec{default_prompt_id(bundle), join(parts, ", "),
                    join(negative_texts(negatives, bundle), ", "), bundle, initial_prompt};
}

std::string EchoCompletionClient::complete(const std::string& instructions) {
  std::istringstream in(instructions);
  std::string line;
  std::string section;
  std::string initial;
  std::vector<std::string> positive_parts;
  std::vector<std::string> negative_parts;
  while (std::getline(in, line)) {
    if (line.rfind(kInitialPromptLabel, 0) == 0) {
      initial = line.substr(kInitialPromptLabel.size());
    } else if (line == kSoftHeader || line == kCreativeHeader || line == kExclusionHeader ||
               line == kFormatHeader) {
      section = line;
    } else if (line.rfind("- ", 0) == 0) {
      (section == kExclusionHeader ? negative_parts : positive_parts).push_back(line.substr(2));
    }
  }
  positive_parts.insert(positive_parts.begin(), initial);
  return json{{"positive_prompt", join(positive_parts, ", ")},
              {"negative_prompt", join(negative_parts, ", ")}}
      .dump();
}

}  // namespace prefloop
