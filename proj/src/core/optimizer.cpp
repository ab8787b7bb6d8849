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
#include "core/optimizer.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace sdda::train {

AdamW::AdamW(const models::ParamStore& store, AdamWOptions options)
    : options_(options) {
  m_.reserve(store.entries().size());
  v_.reserve(store.entries().size());
  for (const auto& e : store.entries()) {
    m_.emplace_back(static_cast<size_t>(e.value.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(e.value.numel()), 0.0);
  }
}

void AdamW::step(models::ParamStore& store) {
  auto& entries = store.entries();
  require(entries.size() == m_.size(), ErrorCode::Internal,
          "AdamW::step: parameter count changed");
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  for (size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (!e.trainable) continue;
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (int64_t k = 0; k < e.value.numel(); ++k) {
      const double g = e.grad[k];
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * g;
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      e.value[k] -= options_.eta * (mhat / (std::sqrt(vhat) + options_.eps) +
                                    options_.weight_decay * e.value[k]);
    }
  }
}

AdamW::Snapshot AdamW::snapshot() const {
  return Snapshot{m_, v_, step_count_};
}

void AdamW::restore(const Snapshot& snap) {
  require(snap.m.size() == m_.size() && snap.v.size() == v_.size(), ErrorCode::Internal,
          "AdamW::restore: moment buffer mismatch");
  m_ = snap.m;
  v_ = snap.v;
  step_count_ = snap.step_count;
}

}  // namespace sdda::train
