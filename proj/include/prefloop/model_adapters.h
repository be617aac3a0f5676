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

#ifndef PREFLOOP_MODEL_ADAPTERS_H_
#define PREFLOOP_MODEL_ADAPTERS_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefloop/feature_repository.h"
#include "prefloop/profile.h"
#include "prefloop/prompt_assembly.h"

namespace prefloop {

// Image generation service. Returns one ImageRef per prompt, in order.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::vector<ImageRef> generate(std::span<const PromptSpec> prompts, uint64_t seed) = 0;
};

// Structured feature extraction service. Returns one validated profile per
// image, in order.
class ExtractionBackend {
 public:
  virtual ~ExtractionBackend() = default;
  virtual std::vector<ImageFeatureProfile> extract(std::span<const ImageRef> images) = 0;
};

// Instruction text for the extraction model: analyst role, every feature
// with its legal values (ordinal levels ascending), and the JSON-only reply
// contract.
std::string build_extraction_prompt(const FeatureRepository& repo);

// Parses a model reply into a profile for `image_id`. The reply is first
// parsed as-is; on failure the outermost {...} span is tried. Discrete and
// ordinal values are trimmed and lower-cased before lookup. Throws
// kExtractionFormatError (no usable JSON object, wrong types, missing
// features) or kIllegalValueError (value not in the repository; subject
// names the feature).
ImageFeatureProfile parse_extraction_response(const std::string& raw,
                                              const FeatureRepository& repo,
                                              const std::string& image_id);

inline constexpr double kDefaultMockNoise = 0.15;

// Offline generator: each image carries a synthetic profile equal to the
// prompt's bundle, with every discrete/ordinal feature independently
// resampled uniformly with probability p_noise. Features the bundle leaves
// open are drawn uniformly. Deterministic in (prompts, seed).
class MockGenerationBackend : public GenerationBackend {
 public:
  MockGenerationBackend(std::shared_ptr<const FeatureRepository> repo,
                        double p_noise = kDefaultMockNoise);

  std::vector<ImageRef> generate(std::span<const PromptSpec> prompts, uint64_t seed) override;

  double p_noise() const { return p_noise_; }

 private:
  ImageFeatureProfile synthesize(const PromptSpec& prompt, const std::string& image_id,
                                 Rng& rng) const;

  std::shared_ptr<const FeatureRepository> repo_;
  double p_noise_;
};

// Returns the embedded profiles verbatim. Throws kNotMockImage for images
// that carry none.
class MockExtractionBackend : public ExtractionBackend {
 public:
  std::vector<ImageFeatureProfile> extract(std::span<const ImageRef> images) override;
};

enum class BackendKind { kMock, kHttp };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string generation_url;
  std::string extraction_url;
  // Language model used for prompt assembly ("vlm" path); POST {url}/complete.
  std::string completion_url;
  int timeout_ms = 30000;
  double p_noise = kDefaultMockNoise;
  std::string auth_header = "Authorization";
  // Name of the environment variable holding the credential, if any.
  std::string auth_token_env;
  int retries = 1;

  bool operator==(const BackendConfig&) const = default;
};

void validate_backend_config(const BackendConfig& cfg);
nlohmann::json backend_config_to_json(const BackendConfig& cfg);
BackendConfig backend_config_from_json(const nlohmann::json& j);

struct Backends {
  std::shared_ptr<GenerationBackend> generation;
  std::shared_ptr<ExtractionBackend> extraction;
  std::shared_ptr<TextCompletionClient> completion;
};

Backends make_mock_backends(std::shared_ptr<const FeatureRepository> repo,
                            double p_noise = kDefaultMockNoise);

}  // namespace prefloop

#endif  // PREFLOOP_MODEL_ADAPTERS_H_
