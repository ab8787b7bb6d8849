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
#include <vector>

#include "core/models.hpp"

namespace sdda::train {

struct AdamWOptions {
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay: the decay pulls directly on the
// parameters and never enters the moment estimates.
class AdamW {
 public:
  explicit AdamW(const models::ParamStore& store, AdamWOptions options);

  // One update from the store's gradient buffers; increments the step count.
  void step(models::ParamStore& store);

  int64_t step_count() const { return step_count_; }
  const AdamWOptions& options() const { return options_; }

  struct Snapshot {
    std::vector<std::vector<double>> m, v;
    int64_t step_count = 0;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

 private:
  AdamWOptions options_;
  std::vector<std::vector<double>> m_, v_;
  int64_t step_count_ = 0;
};

}  // namespace sdda::train
