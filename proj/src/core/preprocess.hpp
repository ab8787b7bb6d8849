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

#include "core/fir.hpp"
#include "core/trialset.hpp"

namespace sdda::preproc {

// Mean trial covariance and its inverse square root, fitted per domain.
struct AlignmentState {
  int E = 0;
  int64_t trial_count = 0;
  std::vector<double> mean_cov;  // E*E, symmetric PSD
  std::vector<double> whitener;  // E*E, symmetric; mean_cov^(-1/2)
  int64_t floored_eigenvalues = 0;
};

// Per-channel bandpass filtering of every trial, length preserving.
data::TrialSet filter_trials(const data::TrialSet& trials, const FirFilter& fir);

// Exponential moving standardization per channel:
//   m_k = decay*m_{k-1} + (1-decay)*x_k, same for the variance;
//   y_k = (x_k - m_k) / sqrt(max(v_k, 1e-4)).
// State is initialized from the first sample.
data::TrialSet ema_standardize(const data::TrialSet& trials, double decay);

// [-1,1] scaling: each channel is divided by its max absolute value.
// Identically-zero channels pass through and are tallied.
data::TrialSet channel_normalize(const data::TrialSet& trials,
                                 int64_t* zero_channel_tally = nullptr);

// Mean covariance of the domain with eigenvalues floored at
// 1e-10 * lambda_max before the inverse square root.
AlignmentState fit_alignment(const data::TrialSet& trials);

// x~ = whitener * x for every trial.
data::TrialSet apply_alignment(const data::TrialSet& trials, const AlignmentState& state);

}  // namespace sdda::preproc
