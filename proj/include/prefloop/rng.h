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

#ifndef PREFLOOP_RNG_H_
#define PREFLOOP_RNG_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace prefloop {

// splitmix64 finalizer; used to derive independent stream seeds.
uint64_t mix64(uint64_t x);

// Derives a child seed from a base seed and a path of integers, e.g.
// (session seed, generation index, candidate index).
uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path);

// Seeded random source. The engine is std::mt19937_64 (fully specified by
// the standard); the transforms below are implemented here rather than with
// <random> distributions so sequences are identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);
  // Standard normal via the Marsaglia polar method.
  double normal();

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace prefloop

#endif  // PREFLOOP_RNG_H_
