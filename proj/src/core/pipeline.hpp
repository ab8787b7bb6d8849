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

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/metrics.hpp"
#include "core/models.hpp"
#include "core/preprocess.hpp"
#include "core/train.hpp"
#include "core/trialset.hpp"

namespace sdda::pipeline {

// Full preprocessing recipe. Filtering and moving standardization are the
// base conditioning shared by every variant; normalization and alignment
// are the constructed domain invariants, toggled by the ablation switch.
struct PreprocOptions {
  bool filter = true;
  int fir_order = 200;
  double band_low_hz = 4.0;
  double band_high_hz = 38.0;
  std::string fir_window = "blackman";
  bool ema = true;
  double ema_decay = 0.999;
  bool normalize = true;
  bool align = true;

  Config to_config() const;
  static PreprocOptions from_config(const Config& cfg);
};

struct PreprocDiag {
  int64_t zero_channels = 0;
  int64_t floored_eigenvalues = 0;
};

// filter -> moving standardization -> [-1,1] normalization -> alignment,
// each stage fitted on this set alone (per-domain invariants).
data::TrialSet preprocess_domain(const data::TrialSet& in, const PreprocOptions& opt,
                                 PreprocDiag* diag = nullptr);

struct TrainedModel {
  models::ModelSpec spec;
  models::ParamStore params;
  PreprocOptions preproc;  // recipe as applied during training
  bool vanilla = false;
};

struct TrainingResult {
  TrainedModel model;
  train::RunRecord record;
  PreprocDiag source_diag, target_diag;
};

// Preprocesses both domains per the config switches, builds the network and
// runs the two-stage protocol. `vanilla_mode` trains the single-branch
// baseline (adaptation losses and constructed invariants off).
TrainingResult run_training(const data::TrialSet& source_raw,
                            const data::TrialSet& target_raw, const train::TrainConfig& cfg,
                            const PreprocOptions& preproc, bool vanilla_mode = false,
                            const data::TrialSet* test_trace_raw = nullptr);

// Applies the model's stored recipe to the raw set (alignment refit on the
// evaluation domain) and scores it.
metrics::EvalReport evaluate_trained(const TrainedModel& model,
                                     const data::TrialSet& labeled_raw);

// Eval-mode embedding rows: index,domain,label,e0..e{L-1}.
std::string export_embeddings_csv(const TrainedModel& model, const data::TrialSet& raw,
                                  const std::string& domain_tag);

void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

struct GridResult {
  std::vector<double> lambda1_values;
  std::vector<double> lambda2_values;
  std::vector<std::vector<double>> mean_accuracy;  // [l1][l2], NaN for failed cells
  double best_lambda1 = 0;
  double best_lambda2 = 0;
  std::string to_csv() const;
};

// Mean labeled-target accuracy over `cfg.repetitions` per grid cell; the
// argmax breaks ties toward smaller lambda2, then smaller lambda1. Note the
// selection uses target labels (upper-bound model selection); the manifest
// records that.
GridResult grid_search(const data::TrialSet& source_raw, const data::TrialSet& target_raw,
                       const train::TrainConfig& base_cfg, const PreprocOptions& preproc);

// (row, column) of the winning cell; NaN cells are excluded and ties break
// toward the smaller column index, then the smaller row index.
std::pair<size_t, size_t> grid_argmax(const std::vector<std::vector<double>>& mean_accuracy);

}  // namespace sdda::pipeline
