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
#include <utility>

#include "core/config.hpp"
#include "core/trialset.hpp"

namespace sdda::data {

// Synthetic motor-imagery-like benchmark with a controllable cross-session
// shift. Rhythm channels are interleaved across classes; a trial of class j
// attenuates the band-limited burst on class j's channels (the ERD cue).
// The target session applies a channel remix (I + shift*G) with symmetrized
// Gaussian G plus a neighbor-smearing component, drifts per-channel gains
// and raises the noise floor; shift = 0 reproduces the source process
// exactly, so both domains are i.i.d. draws.
struct SynthConfig {
  int classes = 2;
  int channels = 8;
  int samples = 512;
  double fs = 128.0;
  int trials_per_domain = 192;
  int rhythm_channels_per_class = 2;
  double burst_low_hz = 10.0;
  double burst_high_hz = 14.0;
  double burst_amp = 1.0;
  double erd_depth = 0.65;      // burst attenuation on the cued class, in [0,1]
  double noise_level = 1.0;
  double mixing_strength = 0.2; // off-diagonal cross-talk of the base mixing
  double session_leak = 0.8;    // symmetric Gaussian remix scale, times shift
  double session_smear = 0.8;   // neighbor-smearing weight, times shift
  double gain_drift = 0.4;      // log-gain std of the target session, scaled by shift
  double noise_growth = 0.5;    // relative noise increase at shift = 1
  double shift = 0.5;           // session-shift strength epsilon
  uint64_t seed = 7;

  void validate() const;
  Config to_config() const;
  static SynthConfig from_config(const Config& cfg);
};

// (source, target); both labeled (the target labels exist only so that
// evaluation oracles can score it; training consumes the target unlabeled).
std::pair<TrialSet, TrialSet> generate_synthetic(const SynthConfig& cfg);

}  // namespace sdda::data
