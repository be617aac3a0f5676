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

#include "prefloop/creative_pool.h"

#include "prefloop/error.h"

namespace prefloop {

using json = nlohmann::json;

namespace {

std::string trim(std::string s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

bool CreativeMaterialsPool::add(PoolCategory category, std::string text, int source_round) {
  text = trim(std::move(text));
  if (text.empty()) return false;
  if (!index_.emplace(category, text).second) return false;
  entries_.push_back(PoolEntry{category, std::move(text), source_round});
  return true;
}

std::vector<const PoolEntry*> CreativeMaterialsPool::in_category(PoolCategory category) const {
  std::vector<const PoolEntry*> out;
  for (const auto& e : entries_) {
    if (e.category == category) out.push_back(&e);
  }
  return out;
}

json CreativeMaterialsPool::to_json() const {
  json arr = json::array();
  for (const auto& e : entries_) {
    arr.push_back({{"category", pool_category_name(e.category)},
                   {"text", e.text},
                   {"source_round", e.source_round}});
  }
  return arr;
}

CreativeMaterialsPool CreativeMaterialsPool::from_json(const json& j) {
  CreativeMaterialsPool pool;
  for (const auto& e : j) {
    auto category = parse_pool_category(e.at("category").get<std::string>());
    if (!category) throw Error(ErrorCode::kParseError, "unknown pool category in state document");
    pool.add(*category, e.at("text").get<std::string>(), e.at("source_round").get<int>());
  }
  return pool;
}

}  // namespace prefloop
