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

#include "core/config.hpp"
#include "core/models.hpp"
#include "core/trialset.hpp"

namespace sdda::train {

// All hyperparameters of a run. Every stream of randomness derives from
// `seed` by label, so a config snapshot reproduces a run bit for bit.
struct TrainConfig {
  std::string arch = "eegnet";  // "eegnet" | "convnet"
  double lambda1 = 1.0;         // center-loss trade-off
  double lambda2 = 0.1;         // discrepancy-loss trade-off
  double eta = 0;               // 0 -> per-arch default (eegnet 1e-3, convnet 1e-4)
  int batch_size = 16;
  double center_rate = 0.5;  // gamma
  double weight_decay = 0.01;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int max_epochs_stage1 = 500;
  int max_epochs_stage2 = 300;
  int patience = 80;
  // Early epochs validate against still-warming batch-norm statistics, so
  // best-checkpoint tracking starts only after this burn-in.
  int min_epochs_stage1 = 5;
  double val_fraction = 0.2;
  uint64_t seed = 1;
  int repetitions = 5;
  bool use_preproc_invariants = true;
  bool use_center = true;
  bool use_mmd = true;
  std::string mmd_bandwidth = "median";  // "median" or a fixed sigma^2
  std::vector<double> mmd_scales = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> lambda1_grid = {0, 0.2, 1, 2, 10, 15};
  std::vector<double> lambda2_grid = {0, 0.02, 0.05, 0.1, 0.2, 0.5};

  void validate() const;
  double resolved_eta() const;
  double effective_lambda1() const { return use_center ? lambda1 : 0.0; }
  double effective_lambda2() const { return use_mmd ? lambda2 : 0.0; }

  Config to_config() const;
  static TrainConfig from_config(const Config& cfg);
};

struct EpochTrace {
  int epoch = 0;  // global epoch index, continuing across stages
  int stage = 1;
  double train_total = 0;
  double train_softmax = 0;
  double train_center = 0;
  double train_mmd = 0;
  double val_loss = 0;  // softmax CE on the held-out split, eval mode
  double val_acc = 0;
  double test_acc = -1;  // -1 when not traced
};

struct RunRecord {
  std::vector<EpochTrace> trace;
  int stage1_epochs = 0;
  int stage2_epochs = 0;
  double best_val_loss = 0;
  int best_epoch = 0;  // stage-1 epoch whose checkpoint seeds stage 2
  double stage2_final_train_loss = 0;
  bool diverged = false;
  std::string note;
  int64_t log_clamp_events = 0;
  double final_train_acc = 0;
  double final_val_acc = 0;
  uint64_t seed = 0;
  std::string config_text;
  double wall_seconds = 0;

  std::string trace_csv() const;
  std::string to_text() const;
};

struct TrainOutput {
  models::ParamStore params;
  RunRecord record;
};

// Two-stage Siamese training: stage 1 trains on 80% of the source, pairing
// every step with a uniformly resampled target batch through the shared
// parameters, and early-stops on validation loss; stage 2 resumes from the
// best stage-1 checkpoint on 100% of the source until the training loss
// falls to the best validation loss. Target labels are never read.
TrainOutput train_siamese(const data::TrialSet& source, const data::TrialSet& target,
                          const models::ModelSpec& spec, const TrainConfig& cfg,
                          const data::TrialSet* test_trace = nullptr);

// Single-branch baseline under the identical two-stage protocol; consumes
// the same init/split/batch/dropout streams, so with the adaptation terms
// disabled the Siamese loop must reproduce its loss trace bit for bit.
TrainOutput train_vanilla(const data::TrialSet& source, const models::ModelSpec& spec,
                          const TrainConfig& cfg,
                          const data::TrialSet* test_trace = nullptr);

// Eval-mode mean softmax CE and accuracy over a labeled set.
struct EvalLoss {
  double ce = 0;
  double accuracy = 0;
};
EvalLoss eval_softmax_metrics(const models::ModelSpec& spec, models::ParamStore& store,
                              const data::TrialSet& set, const std::vector<int>& indices,
                              int batch_size);

}  // namespace sdda::train
