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

#include "prefloop/feature_repository.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"
#include "prefloop/default_repository_data.h"
#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

std::string_view feature_kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kDiscrete: return "discrete";
    case FeatureKind::kOrdinal: return "ordinal";
    case FeatureKind::kFreeForm: return "freeform";
  }
  return "unknown";
}

std::string_view pool_category_name(PoolCategory category) {
  switch (category) {
    case PoolCategory::kOverallImpression: return "overall_impression";
    case PoolCategory::kUniqueElements: return "unique_elements";
    case PoolCategory::kDominantColor: return "dominant_color";
  }
  return "unknown";
}

std::optional<PoolCategory> parse_pool_category(std::string_view name) {
  for (PoolCategory c : kPoolCategories) {
    if (pool_category_name(c) == name) return c;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSpec::value_index(
    std::string_view value) const {
  auto it = std::find(values.begin(), values.end(), value);
  if (it == values.end()) return std::nullopt;
  return static_cast<std::size_t>(it - values.begin());
}

FeatureRepository::FeatureRepository(std::string version,
                                     std::vector<std::string> dimensions,
                                     std::vector<FeatureSpec> features)
    : version_(std::move(version)),
      dimensions_(std::move(dimensions)),
      features_(std::move(features)) {
  std::set<std::string, std::less<>> dims;
  for (const auto& d : dimensions_) {
    if (d.empty()) throw Error(ErrorCode::kValidationError, "empty dimension name");
    if (!dims.insert(d).second) {
      throw Error(ErrorCode::kValidationError, "duplicate dimension '" + d + "'", d);
    }
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    FeatureSpec& f = features_[i];
    if (f.id.empty()) throw Error(ErrorCode::kValidationError, "feature with empty id");
    if (!by_id_.emplace(f.id, i).second) {
      throw Error(ErrorCode::kValidationError, "duplicate feature id '" + f.id + "'", f.id);
    }
    if (!dims.contains(f.dimension)) {
      throw Error(ErrorCode::kValidationError,
                  "feature '" + f.id + "' has unknown dimension '" + f.dimension + "'", f.id);
    }
    if (f.display_name.empty()) f.display_name = display_name_from_id(f.id);
    std::set<std::string, std::less<>> seen;
    for (const auto& v : f.values) {
      if (v.empty() || !seen.insert(v).second) {
        throw Error(ErrorCode::kValidationError,
                    "feature '" + f.id + "' has an empty or duplicate value", f.id);
      }
    }
    f.levels_normalized.clear();
    switch (f.kind) {
      case FeatureKind::kDiscrete:
        if (f.values.empty()) {
          throw Error(ErrorCode::kValidationError,
                      "discrete feature '" + f.id + "' has no values", f.id);
        }
        break;
      case FeatureKind::kOrdinal: {
        const std::size_t levels = f.values.size();
        if (levels < 2) {
          throw Error(ErrorCode::kValidationError,
                      "ordinal feature '" + f.id + "' needs at least 2 levels", f.id);
        }
        f.levels_normalized.reserve(levels);
        for (std::size_t k = 0; k < levels; ++k) {
          f.levels_normalized.push_back(k == levels - 1
                                            ? 1.0
                                            : static_cast<double>(k) / static_cast<double>(levels - 1));
        }
        break;
      }
      case FeatureKind::kFreeForm:
        if (!f.values.empty()) {
          throw Error(ErrorCode::kValidationError,
                      "free-form feature '" + f.id + "' must not list values", f.id);
        }
        break;
    }
    if (f.pool_category && f.kind != FeatureKind::kFreeForm) {
      throw Error(ErrorCode::kValidationError,
                  "only free-form features may feed the creative pool", f.id);
    }
  }
}

const FeatureSpec* FeatureRepository::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &features_[it->second];
}

const FeatureSpec& FeatureRepository::at(std::string_view id) const {
  if (const FeatureSpec* f = find(id)) return *f;
  throw Error(ErrorCode::kUnknownFeature, "unknown feature '" + std::string(id) + "'",
              std::string(id));
}

std::size_t FeatureRepository::count(FeatureKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      features_.begin(), features_.end(),
      [kind](const FeatureSpec& f) { return f.kind == kind; }));
}

bool FeatureRepository::operator==(const FeatureRepository& other) const {
  if (version_ != other.version_ || dimensions_ != other.dimensions_ ||
      features_.size() != other.features_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const FeatureSpec& a = features_[i];
    const FeatureSpec& b = other.features_[i];
    if (a.id != b.id || a.dimension != b.dimension ||
        a.display_name != b.display_name || a.kind != b.kind ||
        a.values != b.values || a.levels_normalized != b.levels_normalized ||
        a.pool_category != b.pool_category) {
      return false;
    }
  }
  return true;
}

namespace {

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::kParseError, "repository schema: " + what);
}

std::string required_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    schema_error(where + ": '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

FeatureKind parse_kind(const std::string& kind, const std::string& id) {
  if (kind == "discrete") return FeatureKind::kDiscrete;
  if (kind == "ordinal") return FeatureKind::kOrdinal;
  if (kind == "freeform") return FeatureKind::kFreeForm;
  throw Error(ErrorCode::kValidationError,
              "feature '" + id + "' has unknown kind '" + kind + "'", id);
}

FeatureRepository from_document(const json& doc) {
  if (!doc.is_object()) schema_error("top level must be an object");
  std::string version = required_string(doc, "version", "document");

  auto dims_it = doc.find("dimensions");
  if (dims_it == doc.end() || !dims_it->is_array()) {
    schema_error("'dimensions' must be an array of strings");
  }
  std::vector<std::string> dimensions;
  for (const auto& d : *dims_it) {
    if (!d.is_string()) schema_error("'dimensions' must be an array of strings");
    dimensions.push_back(d.get<std::string>());
  }

  auto feats_it = doc.find("features");
  if (feats_it == doc.end() || !feats_it->is_array()) {
    schema_error("'features' must be an array");
  }
  std::vector<FeatureSpec> features;
  for (const auto& f : *feats_it) {
    if (!f.is_object()) schema_error("each feature must be an object");
    FeatureSpec spec;
    spec.id = required_string(f, "id", "feature");
    spec.dimension = required_string(f, "dimension", "feature '" + spec.id + "'");
    spec.kind = parse_kind(required_string(f, "kind", "feature '" + spec.id + "'"), spec.id);
    if (auto it = f.find("display_name"); it != f.end()) {
      if (!it->is_string()) schema_error("feature '" + spec.id + "': 'display_name' must be a string");
      spec.display_name = it->get<std::string>();
    }
    auto values_it = f.find("values");
    if (values_it != f.end()) {
      if (!values_it->is_array()) schema_error("feature '" + spec.id + "': 'values' must be an array");
      for (const auto& v : *values_it) {
        if (!v.is_string()) schema_error("feature '" + spec.id + "': values must be strings");
        spec.values.push_back(v.get<std::string>());
      }
    } else if (spec.kind != FeatureKind::kFreeForm) {
      schema_error("feature '" + spec.id + "': missing 'values'");
    }
    if (auto it = f.find("pool_category"); it != f.end()) {
      if (!it->is_string()) schema_error("feature '" + spec.id + "': 'pool_category' must be a string");
      spec.pool_category = parse_pool_category(it->get<std::string>());
      if (!spec.pool_category) {
        throw Error(ErrorCode::kValidationError,
                    "feature '" + spec.id + "' has unknown pool category", spec.id);
      }
    }
    features.push_back(std::move(spec));
  }
  return FeatureRepository(std::move(version), std::move(dimensions), std::move(features));
}

}  // namespace

FeatureRepository load_repository(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("repository JSON: ") + e.what());
  }
  return from_document(doc);
}

FeatureRepository load_repository(std::istream& source) {
  std::string text{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  return load_repository(std::string_view(text));
}

FeatureRepository load_repository_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kParseError, "cannot open repository file " + path.string());
  }
  return load_repository(in);
}

std::string_view default_repository_json() { return kDefaultRepositoryJson; }

const FeatureRepository& default_repository() {
  static const FeatureRepository repo = load_repository(default_repository_json());
  return repo;
}

std::string display_name_from_id(std::string_view id) {
  std::string out(id);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

double normalize_ordinal_level(const FeatureSpec& spec, std::string_view value_id) {
  if (spec.kind != FeatureKind::kOrdinal) {
    throw Error(ErrorCode::kKindMismatch, "feature '" + spec.id + "' is not ordinal", spec.id);
  }
  auto idx = spec.value_index(value_id);
  if (!idx) {
    throw Error(ErrorCode::kUnknownValue,
                "'" + std::string(value_id) + "' is not a level of '" + spec.id + "'", spec.id);
  }
  return spec.levels_normalized[*idx];
}

std::size_t nearest_level_index(const FeatureSpec& spec, double x) {
  if (spec.kind != FeatureKind::kOrdinal) {
    throw Error(ErrorCode::kKindMismatch, "feature '" + spec.id + "' is not ordinal", spec.id);
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorCode::kDomainError, "level position must lie in [0,1]", spec.id);
  }
  std::size_t best = 0;
  double best_dist = std::abs(spec.levels_normalized[0] - x);
  for (std::size_t k = 1; k < spec.levels_normalized.size(); ++k) {
    const double dist = std::abs(spec.levels_normalized[k] - x);
    // Equal distances (up to rounding in k/(L-1)) keep the lower level.
    if (dist < best_dist - 1e-12) {
      best = k;
      best_dist = dist;
    }
  }
  return best;
}

const std::string& nearest_level(const FeatureSpec& spec, double x) {
  return spec.values[nearest_level_index(spec, x)];
}

}  // namespace prefloop
