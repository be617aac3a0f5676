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

#ifndef PREFLOOP_PROFILE_H_
#define PREFLOOP_PROFILE_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prefloop/feature_repository.h"

namespace prefloop {

// One image's value for every repository feature.
struct ImageFeatureProfile {
  std::string image_id;
  std::map<std::string, std::string> discrete_values;
  std::map<std::string, std::string> ordinal_values;
  std::map<std::string, std::vector<std::string>> freeform_values;

  // Value of a discrete or ordinal feature; nullptr if absent.
  const std::string* value_of(const std::string& feature_id) const;

  bool operator==(const ImageFeatureProfile&) const = default;
};

// Throws Error(kValidationError) naming the first offending feature: a
// repository feature missing or filed under the wrong kind, an unknown
// feature, or an illegal value.
void validate_profile(const ImageFeatureProfile& profile, const FeatureRepository& repo);

// Flat extraction-response document: {"<feature_id>": value | [texts]}.
nlohmann::json profile_to_extraction_json(const ImageFeatureProfile& profile);

// Full persisted form, including the image id.
nlohmann::json profile_to_json(const ImageFeatureProfile& profile);
ImageFeatureProfile profile_from_json(const nlohmann::json& j);

struct ImageRef {
  std::string id;
  // Opaque locator: "mock://<id>" for the offline backend, a URI for HTTP.
  std::string uri;
  std::string prompt_id;
  // Ground-truth features attached by the mock generator only.
  std::optional<ImageFeatureProfile> embedded_profile;

  bool operator==(const ImageRef&) const = default;
};

nlohmann::json image_ref_to_json(const ImageRef& ref);
ImageRef image_ref_from_json(const nlohmann::json& j);

}  // namespace prefloop

#endif  // PREFLOOP_PROFILE_H_
