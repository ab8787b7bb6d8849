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
#include <optional>
#include <vector>

#include "core/rng.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace sdda::losses {

struct LossWeights {
  double lambda1 = 0;  // center-loss weight
  double lambda2 = 0;  // discrepancy-loss weight
};

// Per-class embedding centroids for the center loss. Centers move only via
// update_centers, never via the main optimizer; the loss normalizes them,
// so only directions matter.
struct CenterBank {
  ad::Tensor centers;  // (C, L)
  double gamma = 0.5;  // center learning rate
  std::vector<int64_t> update_counts;

  static CenterBank init(int num_classes, int embedding_dim, double gamma, Rng& rng);
};

// Mean-over-batch softmax cross entropy, max-subtraction stable.
ad::Tape::Ref softmax_loss(ad::Tape& tape, ad::Tape::Ref logits,
                           const std::vector<int>& labels);

// 1 - mean cosine similarity between each embedding and its class center;
// bounded in [0,2]. Gradients flow to the embeddings only.
ad::Tape::Ref cosine_center_loss(ad::Tape& tape, ad::Tape::Ref embeddings,
                                 const std::vector<int>& labels, const CenterBank& bank);

// Center update on l2-normalized embeddings:
//   delta_j = sum_{i: y_i=j} (c_j - h_i) / (1 + |{i: y_i=j}|)
//   c_j <- c_j - gamma * delta_j.
// Classes absent from the batch do not move. Centers that collapse to zero
// are re-initialized from `reinit_rng` when provided.
void update_centers(CenterBank& bank, const ad::Tensor& embeddings,
                    const std::vector<int>& labels, Rng* reinit_rng = nullptr);

// Biased V-statistic MMD with the averaged Gaussian kernel family;
// bandwidths are sigma^2 values.
ad::Tape::Ref mmd_loss(ad::Tape& tape, ad::Tape::Ref source_emb,
                       ad::Tape::Ref target_emb, const std::vector<double>& bandwidths);

// Median-heuristic bandwidth family: the base sigma^2 is the median pairwise
// squared distance over the joint batch, scaled by `scales`. Falls back to
// 1.0 when all rows coincide.
std::vector<double> median_bandwidths(const ad::Tensor& source_emb,
                                      const ad::Tensor& target_emb,
                                      const std::vector<double>& scales);

// L = L_s + lambda1*L_c + lambda2*L_d. With both weights zero this returns
// the softmax node itself, so the reduction is exact. NaN components are
// rejected by name.
ad::Tape::Ref total_loss(ad::Tape& tape, ad::Tape::Ref softmax,
                         std::optional<ad::Tape::Ref> center,
                         std::optional<ad::Tape::Ref> discrepancy,
                         const LossWeights& weights);

double total_loss_value(double softmax, double center, double discrepancy,
                        const LossWeights& weights);

// Plain squared-distance center loss on normalized embeddings. Kept only so
// tests can contrast its unbounded response with the cosine form; not wired
// to any training path.
double euclidean_center_loss_value(const ad::Tensor& embeddings,
                                   const std::vector<int>& labels,
                                   const CenterBank& bank);

}  // namespace sdda::losses
