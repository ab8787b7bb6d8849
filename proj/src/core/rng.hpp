/*
 * Copyright 2026 the sdda authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace sdda {

// Deterministic, splittable random stream. All randomness in a run flows
// from one root seed; independent component streams are derived by label
// (e.g. "init", "dropout/source") so that adding or removing a consumer
// never perturbs the draws seen by the others. xoshiro256++ state seeded
// via splitmix64; portable across platforms, unlike <random> distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Child stream: deterministic function of (this stream's seed, label).
  Rng split(std::string_view label) const;
  static Rng from_label(uint64_t root_seed, std::string_view label);

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal, Box-Muller
  uint32_t below(uint32_t bound);         // [0, bound), bound > 0

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n);

  uint64_t seed_base() const { return base_; }

 private:
  uint64_t state_[4];
  uint64_t base_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

uint64_t fnv1a64(const void* data, size_t len);
uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t& state);

// One-step seed combiner for derived seeds (grid cells, repetitions).
uint64_t derive_seed(uint64_t root, std::string_view label);

}  // namespace sdda
