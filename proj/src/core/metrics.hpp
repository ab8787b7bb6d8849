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

#include "core/models.hpp"
#include "core/trialset.hpp"

namespace sdda::metrics {

// Chance-corrected accuracy with p0 = 1/C.
double kappa(double accuracy, int num_classes);

struct EvalReport {
  int n = 0;
  int C = 0;
  double accuracy = 0;
  double kappa = 0;
  std::vector<std::vector<int64_t>> confusion;  // [true][predicted]
  std::vector<int> predictions;
  std::string to_csv() const;
  std::string confusion_csv() const;
};

// Argmax-of-logits evaluation in eval mode (running batch-norm statistics,
// no dropout); ties break toward the lowest class index. The set must be
// preprocessed consistently with training.
EvalReport evaluate(const models::ModelSpec& spec, models::ParamStore& store,
                    const data::TrialSet& labeled_set, int batch_size = 16);

// Per-participant report rows in the style of a results table: methods as
// rows, participants as columns, grand mean (kappa) last.
struct ReportRow {
  std::string method;
  std::string participant;
  double accuracy = 0;  // fraction in [0,1]
};

struct ReportTable {
  std::vector<std::string> methods;       // row order
  std::vector<std::string> participants;  // column order
  std::vector<std::vector<double>> mean_acc;  // [method][participant], NaN when absent
  std::vector<double> average_acc;            // per method
  std::vector<double> average_kappa;
  int C = 2;

  static ReportTable aggregate(const std::vector<ReportRow>& rows, int num_classes);
  std::string to_csv() const;
  std::string to_text() const;  // aligned columns
};

}  // namespace sdda::metrics
