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
#include "core/synth.hpp"

#include <cmath>
#include <vector>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace sdda::data {

void SynthConfig::validate() const {
  require(classes >= 2, ErrorCode::InvalidArgument, "synth: need at least 2 classes");
  require(channels >= 1 && samples >= 8, ErrorCode::InvalidArgument,
          "synth: channels/samples too small");
  require(rhythm_channels_per_class >= 1 &&
              classes * rhythm_channels_per_class <= channels,
          ErrorCode::InvalidArgument,
          "synth: classes * rhythm_channels_per_class must fit into the channel count");
  require(fs > 0, ErrorCode::InvalidArgument, "synth: fs must be positive");
  require(burst_low_hz > 0 && burst_low_hz < burst_high_hz && burst_high_hz < fs / 2,
          ErrorCode::InvalidArgument, "synth: burst band must lie inside (0, fs/2)");
  require(erd_depth >= 0 && erd_depth <= 1, ErrorCode::InvalidArgument,
          "synth: erd_depth must be in [0,1]");
  require(trials_per_domain >= classes, ErrorCode::InvalidArgument,
          "synth: need at least one trial per class");
  require(trials_per_domain % classes == 0, ErrorCode::InvalidArgument,
          "synth: trials_per_domain must be divisible by the class count for exact balance");
  require(shift >= 0, ErrorCode::InvalidArgument, "synth: shift must be nonnegative");
}

Config SynthConfig::to_config() const {
  Config c;
  c.set_int("synth", "classes", classes);
  c.set_int("synth", "channels", channels);
  c.set_int("synth", "samples", samples);
  c.set_double("synth", "fs", fs);
  c.set_int("synth", "trials_per_domain", trials_per_domain);
  c.set_int("synth", "rhythm_channels_per_class", rhythm_channels_per_class);
  c.set_double("synth", "burst_low_hz", burst_low_hz);
  c.set_double("synth", "burst_high_hz", burst_high_hz);
  c.set_double("synth", "burst_amp", burst_amp);
  c.set_double("synth", "erd_depth", erd_depth);
  c.set_double("synth", "noise_level", noise_level);
  c.set_double("synth", "mixing_strength", mixing_strength);
  c.set_double("synth", "session_leak", session_leak);
  c.set_double("synth", "session_smear", session_smear);
  c.set_double("synth", "gain_drift", gain_drift);
  c.set_double("synth", "noise_growth", noise_growth);
  c.set_double("synth", "shift", shift);
  c.set_int("synth", "seed", static_cast<int64_t>(seed));
  return c;
}

SynthConfig SynthConfig::from_config(const Config& cfg) {
  SynthConfig s;
  s.classes = static_cast<int>(cfg.get_int("synth", "classes", s.classes));
  s.channels = static_cast<int>(cfg.get_int("synth", "channels", s.channels));
  s.samples = static_cast<int>(cfg.get_int("synth", "samples", s.samples));
  s.fs = cfg.get_double("synth", "fs", s.fs);
  s.trials_per_domain =
      static_cast<int>(cfg.get_int("synth", "trials_per_domain", s.trials_per_domain));
  s.rhythm_channels_per_class = static_cast<int>(
      cfg.get_int("synth", "rhythm_channels_per_class", s.rhythm_channels_per_class));
  s.burst_low_hz = cfg.get_double("synth", "burst_low_hz", s.burst_low_hz);
  s.burst_high_hz = cfg.get_double("synth", "burst_high_hz", s.burst_high_hz);
  s.burst_amp = cfg.get_double("synth", "burst_amp", s.burst_amp);
  s.erd_depth = cfg.get_double("synth", "erd_depth", s.erd_depth);
  s.noise_level = cfg.get_double("synth", "noise_level", s.noise_level);
  s.mixing_strength = cfg.get_double("synth", "mixing_strength", s.mixing_strength);
  s.session_leak = cfg.get_double("synth", "session_leak", s.session_leak);
  s.session_smear = cfg.get_double("synth", "session_smear", s.session_smear);
  s.gain_drift = cfg.get_double("synth", "gain_drift", s.gain_drift);
  s.noise_growth = cfg.get_double("synth", "noise_growth", s.noise_growth);
  s.shift = cfg.get_double("synth", "shift", s.shift);
  s.seed = static_cast<uint64_t>(cfg.get_int("synth", "seed", static_cast<int64_t>(s.seed)));
  return s;
}

namespace {

// E x E row-major matrix-vector helpers for the mixing stage.
void matmul(const std::vector<double>& a, const std::vector<double>& b,
            std::vector<double>& out, int E) {
  out.assign(static_cast<size_t>(E) * E, 0.0);
  for (int i = 0; i < E; ++i) {
    for (int k = 0; k < E; ++k) {
      const double aik = a[static_cast<size_t>(i) * E + k];
      if (aik == 0.0) continue;
      for (int j = 0; j < E; ++j) {
        out[static_cast<size_t>(i) * E + j] += aik * b[static_cast<size_t>(k) * E + j];
      }
    }
  }
}

// One latent rhythm source per class, projected onto that class's channels
// through a fixed spatial pattern. Every source oscillates in every trial;
// the cued class attenuates its own source (the ERD cue), so the class is
// carried by the spatial correlation structure of the burst power rather
// than by any single channel's amplitude, surviving per-channel rescaling.
TrialSet make_domain(const SynthConfig& cfg, const std::vector<double>& mixing,
                     const std::vector<double>& patterns, double noise_level,
                     Rng& trial_rng, uint16_t session_tag) {
  const int E = cfg.channels, T = cfg.samples, n = cfg.trials_per_domain;
  const int per_class = n / cfg.classes;
  const int ramp = std::max(1, T / 8);

  TrialSet set;
  set.n = n;
  set.E = E;
  set.T = T;
  set.fs = cfg.fs;
  set.C = cfg.classes;
  set.values.resize(static_cast<size_t>(n) * E * T);
  set.labels.resize(static_cast<size_t>(n));
  set.sessions.assign(static_cast<size_t>(n), session_tag);
  set.participant = 1;
  set.has_participant = true;

  // Exact class balance, deterministic order shuffle.
  std::vector<int16_t> labels;
  labels.reserve(static_cast<size_t>(n));
  for (int c = 0; c < cfg.classes; ++c) {
    labels.insert(labels.end(), static_cast<size_t>(per_class), static_cast<int16_t>(c));
  }
  trial_rng.shuffle(labels);

  std::vector<double> latent(static_cast<size_t>(E) * T);
  std::vector<double> burst(static_cast<size_t>(T));
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    set.labels[static_cast<size_t>(i)] = static_cast<int16_t>(y);
    for (int e = 0; e < E; ++e) {
      double* row = latent.data() + static_cast<size_t>(e) * T;
      for (int t = 0; t < T; ++t) row[t] = noise_level * trial_rng.normal();
    }
    for (int j = 0; j < cfg.classes; ++j) {
      const double amp = cfg.burst_amp * (j == y ? 1.0 - cfg.erd_depth : 1.0);
      const double f = trial_rng.uniform(cfg.burst_low_hz, cfg.burst_high_hz);
      const double phase = trial_rng.uniform(0.0, 2.0 * M_PI);
      for (int t = 0; t < T; ++t) {
        double env = 1.0;
        if (t < ramp) env = 0.5 * (1.0 - std::cos(M_PI * t / ramp));
        if (t >= T - ramp) env = 0.5 * (1.0 - std::cos(M_PI * (T - 1 - t) / ramp));
        burst[static_cast<size_t>(t)] = amp * env * std::sin(2.0 * M_PI * f * t / cfg.fs + phase);
      }
      const double* pattern = patterns.data() + static_cast<size_t>(j) * E;
      for (int e = 0; e < E; ++e) {
        if (pattern[e] == 0.0) continue;
        double* row = latent.data() + static_cast<size_t>(e) * T;
        for (int t = 0; t < T; ++t) row[t] += pattern[e] * burst[static_cast<size_t>(t)];
      }
    }
    double* out = set.trial(i);
    for (int e = 0; e < E; ++e) {
      const double* mrow = mixing.data() + static_cast<size_t>(e) * E;
      for (int t = 0; t < T; ++t) {
        double acc = 0;
        for (int k = 0; k < E; ++k) acc += mrow[k] * latent[static_cast<size_t>(k) * T + t];
        out[static_cast<size_t>(e) * T + t] = acc;
      }
    }
  }
  return set;
}

}  // namespace

std::pair<TrialSet, TrialSet> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const int E = cfg.channels;
  const double sqrt_e = std::sqrt(static_cast<double>(E));

  Rng mix_rng = Rng::from_label(cfg.seed, "synth/mixing");
  std::vector<double> base_mixing(static_cast<size_t>(E) * E);
  for (int i = 0; i < E; ++i) {
    for (int j = 0; j < E; ++j) {
      base_mixing[static_cast<size_t>(i) * E + j] =
          (i == j ? 1.0 : 0.0) + cfg.mixing_strength * mix_rng.normal() / sqrt_e;
    }
  }

  // Per-class spatial patterns over interleaved designated channels, fixed
  // for the whole dataset; both sessions share them.
  std::vector<double> patterns(static_cast<size_t>(cfg.classes) * E, 0.0);
  for (int j = 0; j < cfg.classes; ++j) {
    for (int k = 0; k < cfg.rhythm_channels_per_class; ++k) {
      const int channel = j + k * cfg.classes;
      const double magnitude = mix_rng.uniform(0.7, 1.0);
      patterns[static_cast<size_t>(j) * E + channel] = (k % 2 == 0 ? 1.0 : -1.0) * magnitude;
    }
  }

  // Session transform A = diag(exp(gain)) * smear * (I + shift*G) with
  // symmetrized Gaussian G; A -> I exactly at shift 0. The symmetric remix
  // and the neighbor smearing move the spatial patterns in ways the
  // covariance-based alignment can in principle undo, while the gain drift
  // and the raised noise floor degrade both domains alike.
  Rng shift_rng = Rng::from_label(cfg.seed, "synth/shift");
  std::vector<double> remix(static_cast<size_t>(E) * E, 0.0);
  for (int i = 0; i < E; ++i) {
    for (int j = i; j < E; ++j) {
      const double g = cfg.shift * cfg.session_leak * shift_rng.normal() / sqrt_e;
      remix[static_cast<size_t>(i) * E + j] += g;
      if (i != j) remix[static_cast<size_t>(j) * E + i] += g;
    }
    remix[static_cast<size_t>(i) * E + i] += 1.0;
  }
  const double alpha = std::min(0.45, cfg.shift * cfg.session_smear);
  std::vector<double> smear(static_cast<size_t>(E) * E, 0.0);
  for (int i = 0; i < E; ++i) {
    smear[static_cast<size_t>(i) * E + i] = 1.0 - alpha;
    smear[static_cast<size_t>(i) * E + (i + 1) % E] += alpha / 2.0;
    smear[static_cast<size_t>(i) * E + (i + E - 1) % E] += alpha / 2.0;
  }
  std::vector<double> session;
  matmul(smear, remix, session, E);
  for (int i = 0; i < E; ++i) {
    const double gain = std::exp(cfg.gain_drift * cfg.shift * shift_rng.normal());
    for (int j = 0; j < E; ++j) session[static_cast<size_t>(i) * E + j] *= gain;
  }
  std::vector<double> target_mixing;
  matmul(session, base_mixing, target_mixing, E);

  Rng source_rng = Rng::from_label(cfg.seed, "synth/source");
  Rng target_rng = Rng::from_label(cfg.seed, "synth/target");
  TrialSet source = make_domain(cfg, base_mixing, patterns, cfg.noise_level, source_rng, 1);
  TrialSet target = make_domain(cfg, target_mixing, patterns,
                                cfg.noise_level * (1.0 + cfg.noise_growth * cfg.shift),
                                target_rng, 2);
  return {std::move(source), std::move(target)};
}

}  // namespace sdda::data
