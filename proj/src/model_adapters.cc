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

#include "prefloop/model_adapters.h"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "prefloop/error.h"
#include "prefloop/rng.h"

namespace prefloop {

using json = nlohmann::json;

std::string build_extraction_prompt(const FeatureRepository& repo) {
  std::ostringstream out;
  out << "You are an expert image analyst. Examine the image the way a professional "
         "photographer or art director would, not casually.\n\n"
      << "Describe the image strictly within the feature standard below. Every feature must be "
         "reported.\n\nFEATURES\n";
  for (const FeatureSpec& f : repo.features()) {
    out << "- " << f.id << " (" << f.dimension << ", " << feature_kind_name(f.kind) << "): ";
    switch (f.kind) {
      case FeatureKind::kDiscrete:
        out << "one of ";
        for (std::size_t i = 0; i < f.values.size(); ++i) out << (i ? " | " : "") << f.values[i];
        break;
      case FeatureKind::kOrdinal:
        out << "one level, ascending: ";
        for (std::size_t i = 0; i < f.values.size(); ++i) out << (i ? " < " : "") << f.values[i];
        break;
      case FeatureKind::kFreeForm:
        out << "array of short natural-language descriptions";
        break;
    }
    out << "\n";
  }
  out << "\nOUTPUT\nReturn strict JSON only: a single JSON object with one key per feature id "
         "above. Discrete and ordinal features take exactly one listed value id as a string. "
         "Free-form features take an array of strings. No prose, no markdown, no code fences.\n";
  return out.str();
}

namespace {

std::string fold(std::string s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  s = s.substr(b, s.find_last_not_of(ws) - b + 1);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

json parse_reply_object(const std::string& raw) {
  try {
    json doc = json::parse(raw);
    if (doc.is_object()) return doc;
  } catch (const json::parse_error&) {
  }
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(ErrorCode::kExtractionFormatError, "extraction reply contains no JSON object");
  }
  try {
    json doc = json::parse(raw.substr(open, close - open + 1));
    if (doc.is_object()) return doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kExtractionFormatError, std::string("extraction reply: ") + e.what());
  }
  throw Error(ErrorCode::kExtractionFormatError, "extraction reply is not a JSON object");
}

}  // namespace

ImageFeatureProfile parse_extraction_response(const std::string& raw,
                                              const FeatureRepository& repo,
                                              const std::string& image_id) {
  const json doc = parse_reply_object(raw);
  std::map<std::string, const json*> by_key;
  for (const auto& [k, v] : doc.items()) by_key.emplace(fold(k), &v);

  ImageFeatureProfile profile;
  profile.image_id = image_id;
  for (const FeatureSpec& spec : repo.features()) {
    auto it = by_key.find(spec.id);
    const json* value = it == by_key.end() ? nullptr : it->second;
    if (spec.kind == FeatureKind::kFreeForm) {
      std::vector<std::string> texts;
      if (value == nullptr || value->is_null()) {
      } else if (value->is_string()) {
        texts.push_back(value->get<std::string>());
      } else if (value->is_array()) {
        for (const auto& t : *value) {
          if (!t.is_string()) {
            throw Error(ErrorCode::kExtractionFormatError,
                        "free-form feature '" + spec.id + "' must hold strings", spec.id);
          }
          texts.push_back(t.get<std::string>());
        }
      } else {
        throw Error(ErrorCode::kExtractionFormatError,
                    "free-form feature '" + spec.id + "' must be a string array", spec.id);
      }
      profile.freeform_values[spec.id] = std::move(texts);
      continue;
    }
    if (value == nullptr) {
      throw Error(ErrorCode::kExtractionFormatError,
                  "extraction reply is missing feature '" + spec.id + "'", spec.id);
    }
    if (!value->is_string()) {
      throw Error(ErrorCode::kExtractionFormatError,
                  "feature '" + spec.id + "' must be a string value id", spec.id);
    }
    std::string v = value->get<std::string>();
    if (!spec.has_value(v)) v = fold(v);
    if (!spec.has_value(v)) {
      throw Error(ErrorCode::kIllegalValueError,
                  "'" + value->get<std::string>() + "' is not a legal value of '" + spec.id + "'",
                  spec.id);
    }
    (spec.kind == FeatureKind::kDiscrete ? profile.discrete_values
                                         : profile.ordinal_values)[spec.id] = std::move(v);
  }
  return profile;
}

MockGenerationBackend::MockGenerationBackend(std::shared_ptr<const FeatureRepository> repo,
                                             double p_noise)
    : repo_(std::move(repo)), p_noise_(p_noise) {
  if (!(p_noise_ >= 0.0 && p_noise_ <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "p_noise must lie in [0,1]");
  }
}

std::vector<ImageRef> MockGenerationBackend::generate(std::span<const PromptSpec> prompts,
                                                      uint64_t seed) {
  std::vector<ImageRef> out;
  out.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    Rng rng(derive_seed(seed, {i}));
    char id[32];
    std::snprintf(id, sizeof(id), "img-%016llx",
                  static_cast<unsigned long long>(derive_seed(seed, {i, 0x1d})));
    ImageRef ref;
    ref.id = id;
    ref.uri = "mock://" + ref.id;
    ref.prompt_id = prompts[i].id;
    ref.embedded_profile = synthesize(prompts[i], ref.id, rng);
    out.push_back(std::move(ref));
  }
  return out;
}

ImageFeatureProfile MockGenerationBackend::synthesize(const PromptSpec& prompt,
                                                      const std::string& image_id,
                                                      Rng& rng) const {
  ImageFeatureProfile p;
  p.image_id = image_id;
  std::vector<const FeatureSpec*> valued;
  for (const FeatureSpec& spec : repo_->features()) {
    if (spec.kind == FeatureKind::kFreeForm) continue;
    valued.push_back(&spec);
    const std::string* chosen = prompt.bundle.choice_for(spec.id);
    std::string value = chosen && spec.has_value(*chosen)
                            ? *chosen
                            : spec.values[rng.index(spec.values.size())];
    if (rng.uniform() < p_noise_) value = spec.values[rng.index(spec.values.size())];
    (spec.kind == FeatureKind::kDiscrete ? p.discrete_values : p.ordinal_values)[spec.id] = value;
  }

  // Free-form texts are read off the image's own values: two features from
  // the same dimension where possible, otherwise two picked by position.
  std::size_t freeform_index = 0;
  for (const FeatureSpec& spec : repo_->features()) {
    if (spec.kind != FeatureKind::kFreeForm) continue;
    std::vector<std::string> texts;
    if (spec.dimension == "subject" && !prompt.initial_prompt.empty()) {
      texts.push_back(prompt.initial_prompt);
    }
    std::vector<const FeatureSpec*> sources;
    for (const FeatureSpec* v : valued) {
      if (v->dimension == spec.dimension && sources.size() < 2) sources.push_back(v);
    }
    if (sources.empty() && !valued.empty()) {
      sources.push_back(valued[(3 * freeform_index) % valued.size()]);
      sources.push_back(valued[(3 * freeform_index + 1) % valued.size()]);
    }
    for (const FeatureSpec* s : sources) {
      texts.push_back(display_name_from_id(*p.value_of(s->id)) + " " + s->display_name);
    }
    p.freeform_values[spec.id] = std::move(texts);
    ++freeform_index;
  }
  return p;
}

std::vector<ImageFeatureProfile> MockExtractionBackend::extract(std::span<const ImageRef> images) {
  std::vector<ImageFeatureProfile> out;
  out.reserve(images.size());
  for (const ImageRef& img : images) {
    if (!img.embedded_profile) {
      throw Error(ErrorCode::kNotMockImage, "image '" + img.id + "' has no embedded profile",
                  img.id);
    }
    ImageFeatureProfile p = *img.embedded_profile;
    p.image_id = img.id;
    out.push_back(std::move(p));
  }
  return out;
}

void validate_backend_config(const BackendConfig& cfg) {
  if (cfg.timeout_ms <= 0) throw Error(ErrorCode::kConfigError, "timeout_ms must be > 0");
  if (!(cfg.p_noise >= 0.0 && cfg.p_noise <= 1.0)) {
    throw Error(ErrorCode::kConfigError, "p_noise must lie in [0,1]");
  }
  if (cfg.retries < 0 || cfg.retries > 1) {
    throw Error(ErrorCode::kConfigError, "retries must be 0 or 1");
  }
  if (cfg.kind == BackendKind::kHttp &&
      (cfg.generation_url.empty() || cfg.extraction_url.empty())) {
    throw Error(ErrorCode::kConfigError, "http backend needs generation_url and extraction_url");
  }
}

json backend_config_to_json(const BackendConfig& cfg) {
  return json{{"kind", cfg.kind == BackendKind::kMock ? "mock" : "http"},
              {"generation_url", cfg.generation_url},
              {"extraction_url", cfg.extraction_url},
              {"completion_url", cfg.completion_url},
              {"timeout_ms", cfg.timeout_ms},
              {"p_noise", cfg.p_noise},
              {"auth_header", cfg.auth_header},
              {"auth_token_env", cfg.auth_token_env},
              {"retries", cfg.retries}};
}

BackendConfig backend_config_from_json(const json& j) {
  BackendConfig cfg;
  const std::string kind = j.value("kind", std::string("mock"));
  if (kind == "mock") {
    cfg.kind = BackendKind::kMock;
  } else if (kind == "http") {
    cfg.kind = BackendKind::kHttp;
  } else {
    throw Error(ErrorCode::kConfigError, "backend kind must be mock or http");
  }
  cfg.generation_url = j.value("generation_url", cfg.generation_url);
  cfg.extraction_url = j.value("extraction_url", cfg.extraction_url);
  cfg.completion_url = j.value("completion_url", cfg.completion_url);
  cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
  cfg.p_noise = j.value("p_noise", cfg.p_noise);
  cfg.auth_header = j.value("auth_header", cfg.auth_header);
  cfg.auth_token_env = j.value("auth_token_env", cfg.auth_token_env);
  cfg.retries = j.value("retries", cfg.retries);
  validate_backend_config(cfg);
  return cfg;
}

Backends make_mock_backends(std::shared_ptr<const FeatureRepository> repo, double p_noise) {
  return Backends{std::make_shared<MockGenerationBackend>(std::move(repo), p_noise),
                  std::make_shared<MockExtractionBackend>(),
                  std::make_shared<EchoCompletionClient>()};
}

}  // namespace prefloop
