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
#include <string>
#include <vector>

namespace sdda::ad {

// Central finite-difference check (h = 1e-5) of one kernel's analytic
// gradients on seeded random inputs. Returns the elementwise maximum
// relative error over every differentiable input; deterministic per
// (kind, shape, seed) and side-effect free.
double grad_check(const std::string& op_kind, const std::vector<int>& input_shape,
                  uint64_t seed);
double grad_check(const std::string& op_kind, uint64_t seed);

// Every checkable kernel, including the three loss heads.
const std::vector<std::string>& grad_check_kinds();

}  // namespace sdda::ad
