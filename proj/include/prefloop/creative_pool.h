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

#ifndef PREFLOOP_CREATIVE_POOL_H_
#define PREFLOOP_CREATIVE_POOL_H_

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prefloop/feature_repository.h"

namespace prefloop {

struct PoolEntry {
  PoolCategory category;
  std::string text;
  int source_round = 0;

  bool operator==(const PoolEntry&) const = default;
};

// Free-form descriptions collected from liked images. Entries are unique per
// (category, text); a repeated text keeps the round it was first seen in.
class CreativeMaterialsPool {
 public:
  // Ignores empty (after trimming) and duplicate texts. Returns whether the
  // entry was added.
  bool add(PoolCategory category, std::string text, int source_round);

  const std::vector<PoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<const PoolEntry*> in_category(PoolCategory category) const;

  nlohmann::json to_json() const;
  static CreativeMaterialsPool from_json(const nlohmann::json& j);

  bool operator==(const CreativeMaterialsPool& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<PoolEntry> entries_;
  std::set<std::pair<PoolCategory, std::string>> index_;
};

}  // namespace prefloop

#endif  // PREFLOOP_CREATIVE_POOL_H_
