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
#include <utility>
#include <vector>

namespace sdda::data {

// A labeled or unlabeled collection of trials; each trial is a channels x
// time matrix sampled at fs Hz. Values live in one contiguous buffer,
// trial-major then channel-major.
struct TrialSet {
  int n = 0;  // trials
  int E = 0;  // channels
  int T = 0;  // samples per channel
  double fs = 0;
  int C = 0;  // class count (meaningful when labeled)
  std::vector<double> values;      // n*E*T
  std::vector<int16_t> labels;     // empty when unlabeled, else size n in [0,C)
  std::vector<uint16_t> sessions;  // optional per-trial session tag, size n
  uint16_t participant = 0;
  bool has_participant = false;

  bool labeled() const { return !labels.empty(); }
  bool has_sessions() const { return !sessions.empty(); }

  double* trial(int i) { return values.data() + static_cast<int64_t>(i) * E * T; }
  const double* trial(int i) const {
    return values.data() + static_cast<int64_t>(i) * E * T;
  }
  double& at(int i, int e, int t) {
    return values[(static_cast<int64_t>(i) * E + e) * T + t];
  }
  double at(int i, int e, int t) const {
    return values[(static_cast<int64_t>(i) * E + e) * T + t];
  }

  void validate() const;  // throws on any broken invariant
};

// Binary trial container, magic "TRL1". Payload is 32-bit float; labels are
// int16. An optional provenance block (flag bit 1) carries the participant
// id and per-trial session tags so that round trips preserve them.
TrialSet read_container(const std::string& path);
void write_container(const TrialSet& set, const std::string& path);

// Directory of one CSV per trial (rows = channels) plus an optional
// `labels.csv` index of `filename,label` lines. Missing index -> unlabeled.
TrialSet import_csv(const std::string& dir, double fs);

// Session split policies: "iia" (tag 1 -> source, tag 2 -> target) and
// "iib" (tags 1-3 -> source, tags 4-5 -> target).
std::pair<TrialSet, TrialSet> split_sessions(const TrialSet& set,
                                             const std::string& policy);

// Subset by trial indices (labels/sessions follow).
TrialSet subset(const TrialSet& set, const std::vector<int>& indices);

}  // namespace sdda::data
