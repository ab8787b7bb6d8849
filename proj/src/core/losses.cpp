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
#include "core/losses.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace sdda::losses {

namespace {
constexpr double kNormFloor = 1e-12;

void check_finite_component(double v, const char* name) {
  if (std::isnan(v)) {
    fail(ErrorCode::NonFinite, std::string("total_loss: ") + name + " component is NaN");
  }
}
}  // namespace

CenterBank CenterBank::init(int num_classes, int embedding_dim, double gamma, Rng& rng) {
  require(num_classes >= 1 && embedding_dim >= 1, ErrorCode::InvalidArgument,
          "CenterBank::init: need at least one class and one embedding dim");
  CenterBank bank;
  bank.gamma = gamma;
  bank.update_counts.assign(static_cast<size_t>(num_classes), 0);
  bank.centers = ad::Tensor({num_classes, embedding_dim});
  for (int c = 0; c < num_classes; ++c) {
    double norm = 0;
    double* row = bank.centers.data() + static_cast<int64_t>(c) * embedding_dim;
    while (norm <= kNormFloor) {
      norm = 0;
      for (int k = 0; k < embedding_dim; ++k) {
        row[k] = rng.normal();
        norm += row[k] * row[k];
      }
      norm = std::sqrt(norm);
    }
    for (int k = 0; k < embedding_dim; ++k) row[k] /= norm;
  }
  return bank;
}

ad::Tape::Ref softmax_loss(ad::Tape& tape, ad::Tape::Ref logits,
                           const std::vector<int>& labels) {
  return tape.nll_mean(tape.log_softmax(logits), labels);
}

ad::Tape::Ref cosine_center_loss(ad::Tape& tape, ad::Tape::Ref embeddings,
                                 const std::vector<int>& labels, const CenterBank& bank) {
  return tape.cosine_center(embeddings, labels, bank.centers);
}

void update_centers(CenterBank& bank, const ad::Tensor& embeddings,
                    const std::vector<int>& labels, Rng* reinit_rng) {
  require(embeddings.rank() == 2, ErrorCode::ShapeMismatch,
          "update_centers: embeddings must be rank 2, got " + embeddings.shape_str());
  const int b = embeddings.dim(0), L = embeddings.dim(1);
  const int C = bank.centers.dim(0);
  require(bank.centers.dim(1) == L, ErrorCode::ShapeMismatch,
          "update_centers: embedding width " + std::to_string(L) +
              " != center width " + std::to_string(bank.centers.dim(1)));
  require(static_cast<int>(labels.size()) == b, ErrorCode::ShapeMismatch,
          "update_centers: label count mismatch");

  std::vector<double> delta(static_cast<size_t>(C) * L, 0.0);
  std::vector<int> counts(static_cast<size_t>(C), 0);
  std::vector<double> hbar(static_cast<size_t>(L));
  for (int i = 0; i < b; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    require(y >= 0 && y < C, ErrorCode::LabelRange,
            "update_centers: label " + std::to_string(y) + " outside [0," +
                std::to_string(C) + ")");
    const double* h = embeddings.data() + static_cast<int64_t>(i) * L;
    double norm = 0;
    for (int k = 0; k < L; ++k) norm += h[k] * h[k];
    norm = std::max(std::sqrt(norm), kNormFloor);
    for (int k = 0; k < L; ++k) hbar[static_cast<size_t>(k)] = h[k] / norm;
    const double* c = bank.centers.data() + static_cast<int64_t>(y) * L;
    double* d = delta.data() + static_cast<int64_t>(y) * L;
    for (int k = 0; k < L; ++k) d[k] += c[k] - hbar[static_cast<size_t>(k)];
    ++counts[static_cast<size_t>(y)];
  }
  for (int j = 0; j < C; ++j) {
    if (counts[static_cast<size_t>(j)] == 0) continue;
    const double scale = bank.gamma / (1.0 + counts[static_cast<size_t>(j)]);
    double* c = bank.centers.data() + static_cast<int64_t>(j) * L;
    const double* d = delta.data() + static_cast<int64_t>(j) * L;
    double norm = 0;
    for (int k = 0; k < L; ++k) {
      c[k] -= scale * d[k];
      norm += c[k] * c[k];
    }
    ++bank.update_counts[static_cast<size_t>(j)];
    if (std::sqrt(norm) <= kNormFloor && reinit_rng) {
      // A collapsed center has no direction; redraw it on the unit sphere.
      norm = 0;
      while (norm <= kNormFloor) {
        norm = 0;
        for (int k = 0; k < L; ++k) {
          c[k] = reinit_rng->normal();
          norm += c[k] * c[k];
        }
        norm = std::sqrt(norm);
      }
      for (int k = 0; k < L; ++k) c[k] /= norm;
    }
  }
}

ad::Tape::Ref mmd_loss(ad::Tape& tape, ad::Tape::Ref source_emb, ad::Tape::Ref target_emb,
                       const std::vector<double>& bandwidths) {
  return tape.mmd(source_emb, target_emb, bandwidths);
}

std::vector<double> median_bandwidths(const ad::Tensor& source_emb,
                                      const ad::Tensor& target_emb,
                                      const std::vector<double>& scales) {
  require(source_emb.rank() == 2 && target_emb.rank() == 2, ErrorCode::ShapeMismatch,
          "median_bandwidths: embeddings must be rank 2");
  require(source_emb.dim(1) == target_emb.dim(1), ErrorCode::ShapeMismatch,
          "median_bandwidths: embedding widths differ");
  require(!scales.empty(), ErrorCode::InvalidArgument,
          "median_bandwidths: empty scale list");
  const int L = source_emb.dim(1);
  const int ns = source_emb.dim(0), nt = target_emb.dim(0);
  const int total = ns + nt;
  auto row = [&](int i) {
    return i < ns ? source_emb.data() + static_cast<int64_t>(i) * L
                  : target_emb.data() + static_cast<int64_t>(i - ns) * L;
  };
  std::vector<double> d2;
  d2.reserve(static_cast<size_t>(total) * (total - 1) / 2);
  for (int i = 0; i < total; ++i) {
    const double* a = row(i);
    for (int j = i + 1; j < total; ++j) {
      const double* c = row(j);
      double s = 0;
      for (int k = 0; k < L; ++k) {
        const double d = a[k] - c[k];
        s += d * d;
      }
      d2.push_back(s);
    }
  }
  double base = 1.0;
  if (!d2.empty()) {
    const size_t mid = d2.size() / 2;
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(mid), d2.end());
    base = d2[mid];
    if (base <= 0) base = 1.0;
  }
  std::vector<double> bw;
  bw.reserve(scales.size());
  for (double s : scales) bw.push_back(base * s);
  return bw;
}

ad::Tape::Ref total_loss(ad::Tape& tape, ad::Tape::Ref softmax,
                         std::optional<ad::Tape::Ref> center,
                         std::optional<ad::Tape::Ref> discrepancy,
                         const LossWeights& weights) {
  require(weights.lambda1 >= 0 && weights.lambda2 >= 0, ErrorCode::InvalidArgument,
          "total_loss: trade-off weights must be nonnegative");
  check_finite_component(tape.value(softmax).item(), "softmax");
  ad::Tape::Ref total = softmax;
  if (weights.lambda1 != 0.0) {
    require(center.has_value(), ErrorCode::InvalidArgument,
            "total_loss: lambda1 > 0 but no center component");
    check_finite_component(tape.value(*center).item(), "center");
    total = tape.add(total, tape.scale(*center, weights.lambda1));
  }
  if (weights.lambda2 != 0.0) {
    require(discrepancy.has_value(), ErrorCode::InvalidArgument,
            "total_loss: lambda2 > 0 but no discrepancy component");
    check_finite_component(tape.value(*discrepancy).item(), "discrepancy");
    total = tape.add(total, tape.scale(*discrepancy, weights.lambda2));
  }
  return total;
}

double total_loss_value(double softmax, double center, double discrepancy,
                        const LossWeights& weights) {
  check_finite_component(softmax, "softmax");
  check_finite_component(center, "center");
  check_finite_component(discrepancy, "discrepancy");
  return softmax + weights.lambda1 * center + weights.lambda2 * discrepancy;
}

double euclidean_center_loss_value(const ad::Tensor& embeddings,
                                   const std::vector<int>& labels, const CenterBank& bank) {
  const int b = embeddings.dim(0), L = embeddings.dim(1);
  double total = 0;
  for (int i = 0; i < b; ++i) {
    const double* h = embeddings.data() + static_cast<int64_t>(i) * L;
    const double* c =
        bank.centers.data() + static_cast<int64_t>(labels[static_cast<size_t>(i)]) * L;
    double s = 0;
    for (int k = 0; k < L; ++k) {
      const double d = h[k] - c[k];
      s += d * d;
    }
    total += s;
  }
  return total / (2.0 * b);
}

}  // namespace sdda::losses
