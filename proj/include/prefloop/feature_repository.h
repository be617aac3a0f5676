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

#ifndef PREFLOOP_FEATURE_REPOSITORY_H_
#define PREFLOOP_FEATURE_REPOSITORY_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prefloop {

enum class FeatureKind { kDiscrete, kOrdinal, kFreeForm };

std::string_view feature_kind_name(FeatureKind kind);

// Categories of the creative materials pool. Free-form features declare which
// category (if any) their liked-image texts feed.
enum class PoolCategory { kOverallImpression, kUniqueElements, kDominantColor };

inline constexpr PoolCategory kPoolCategories[] = {
    PoolCategory::kOverallImpression, PoolCategory::kUniqueElements,
    PoolCategory::kDominantColor};

std::string_view pool_category_name(PoolCategory category);
std::optional<PoolCategory> parse_pool_category(std::string_view name);

struct FeatureSpec {
  std::string id;
  std::string dimension;
  std::string display_name;
  FeatureKind kind = FeatureKind::kDiscrete;
  // Discrete: declaration order. Ordinal: ascending.
  std::vector<std::string> values;
  // Ordinal only: {0, 1/(L-1), ..., 1}.
  std::vector<double> levels_normalized;
  std::optional<PoolCategory> pool_category;

  std::optional<std::size_t> value_index(std::string_view value) const;
  bool has_value(std::string_view value) const {
    return value_index(value).has_value();
  }
};

// Immutable after construction; safe to share across threads.
class FeatureRepository {
 public:
  FeatureRepository(std::string version, std::vector<std::string> dimensions,
                    std::vector<FeatureSpec> features);

  const std::string& version() const { return version_; }
  const std::vector<std::string>& dimensions() const { return dimensions_; }
  // Declaration order.
  const std::vector<FeatureSpec>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }

  const FeatureSpec* find(std::string_view id) const;
  // Throws Error(kUnknownFeature).
  const FeatureSpec& at(std::string_view id) const;

  std::size_t count(FeatureKind kind) const;

  bool operator==(const FeatureRepository& other) const;

 private:
  std::string version_;
  std::vector<std::string> dimensions_;
  std::vector<FeatureSpec> features_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Parses and validates the repository JSON document. Throws Error with
// kParseError for malformed JSON or schema shape and kValidationError for
// semantic violations (duplicate ids, ordinal with fewer than two levels,
// unknown kind or dimension).
FeatureRepository load_repository(std::istream& source);
FeatureRepository load_repository(std::string_view text);
FeatureRepository load_repository_file(const std::filesystem::path& path);

// The bundled 28-feature repository.
const FeatureRepository& default_repository();
std::string_view default_repository_json();

// "high_key" -> "high key".
std::string display_name_from_id(std::string_view id);

// Position of `value_id` on the [0,1] scale. Throws kKindMismatch for
// non-ordinal specs, kUnknownValue for values outside the spec.
double normalize_ordinal_level(const FeatureSpec& spec,
                               std::string_view value_id);

// Level whose normalized position is closest to x; ties go to the lower
// level. Throws kKindMismatch, or kDomainError when x is outside [0,1].
const std::string& nearest_level(const FeatureSpec& spec, double x);
std::size_t nearest_level_index(const FeatureSpec& spec, double x);

}  // namespace prefloop

#endif  // PREFLOOP_FEATURE_REPOSITORY_H_
