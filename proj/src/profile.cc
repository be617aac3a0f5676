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

#include "prefloop/profile.h"

#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

const std::string* ImageFeatureProfile::value_of(const std::string& feature_id) const {
  if (auto it = discrete_values.find(feature_id); it != discrete_values.end()) return &it->second;
  if (auto it = ordinal_values.find(feature_id); it != ordinal_values.end()) return &it->second;
  return nullptr;
}

namespace {

[[noreturn]] void invalid(const std::string& feature, const std::string& what) {
  throw Error(ErrorCode::kValidationError, "profile: feature '" + feature + "' " + what, feature);
}

template <typename Map>
void check_keys_known(const Map& m, const FeatureRepository& repo, FeatureKind kind) {
  for (const auto& [id, _] : m) {
    const FeatureSpec* spec = repo.find(id);
    if (!spec) invalid(id, "is not in the repository");
    if (spec->kind != kind) invalid(id, "is filed under the wrong kind");
  }
}

}  // namespace

void validate_profile(const ImageFeatureProfile& profile, const FeatureRepository& repo) {
  check_keys_known(profile.discrete_values, repo, FeatureKind::kDiscrete);
  check_keys_known(profile.ordinal_values, repo, FeatureKind::kOrdinal);
  check_keys_known(profile.freeform_values, repo, FeatureKind::kFreeForm);
  for (const FeatureSpec& spec : repo.features()) {
    switch (spec.kind) {
      case FeatureKind::kDiscrete:
      case FeatureKind::kOrdinal: {
        const auto& m = spec.kind == FeatureKind::kDiscrete ? profile.discrete_values
                                                            : profile.ordinal_values;
        auto it = m.find(spec.id);
        if (it == m.end()) invalid(spec.id, "is missing");
        if (!spec.has_value(it->second)) invalid(spec.id, "has illegal value '" + it->second + "'");
        break;
      }
      case FeatureKind::kFreeForm:
        if (!profile.freeform_values.contains(spec.id)) invalid(spec.id, "is missing");
        break;
    }
  }
}

json profile_to_extraction_json(const ImageFeatureProfile& profile) {
  json j = json::object();
  for (const auto& [k, v] : profile.discrete_values) j[k] = v;
  for (const auto& [k, v] : profile.ordinal_values) j[k] = v;
  for (const auto& [k, v] : profile.freeform_values) j[k] = v;
  return j;
}

json profile_to_json(const ImageFeatureProfile& profile) {
  return json{{"image_id", profile.image_id},
              {"discrete", profile.discrete_values},
              {"ordinal", profile.ordinal_values},
              {"freeform", profile.freeform_values}};
}

ImageFeatureProfile profile_from_json(const json& j) {
  ImageFeatureProfile p;
  p.image_id = j.at("image_id").get<std::string>();
  p.discrete_values = j.at("discrete").get<std::map<std::string, std::string>>();
  p.ordinal_values = j.at("ordinal").get<std::map<std::string, std::string>>();
  p.freeform_values = j.at("freeform").get<std::map<std::string, std::vector<std::string>>>();
  return p;
}

json image_ref_to_json(const ImageRef& ref) {
  json j{{"id", ref.id}, {"uri", ref.uri}, {"prompt_id", ref.prompt_id}};
  if (ref.embedded_profile) j["embedded_profile"] = profile_to_json(*ref.embedded_profile);
  return j;
}

ImageRef image_ref_from_json(const json& j) {
  ImageRef ref;
  ref.id = j.at("id").get<std::string>();
  ref.uri = j.at("uri").get<std::string>();
  ref.prompt_id = j.at("prompt_id").get<std::string>();
  if (auto it = j.find("embedded_profile"); it != j.end()) {
    ref.embedded_profile = profile_from_json(*it);
  }
  return ref;
}

}  // namespace prefloop
