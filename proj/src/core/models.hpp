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
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tape.hpp"
#include "core/tensor.hpp"

namespace sdda::models {

enum class LayerKind {
  Conv2d,
  DepthwiseConv2d,
  BatchNorm,
  Square,
  LogActivation,
  Elu,
  AvgPool,
  Dropout,
  Flatten,
  FullyConnected,
};

struct LayerDesc {
  LayerKind kind;
  std::string name;        // unique except for fused count groups
  std::string count_group; // rows of the parameter table merge on this
  int kh = 1, kw = 1;
  int in_maps = 1, out_maps = 1;
  int stride = 1;
  ad::Pad pad = ad::Pad::Valid;
  bool bias = false;
  double p = 0.0;  // dropout probability
  // shape after this layer, filled in by the builder
  int out_maps_actual = 1, out_h = 0, out_w = 0;
};

// Declarative network description; building is pure and deterministic.
struct ModelSpec {
  std::string arch;  // "convnet" | "eegnet"
  int E = 0, T = 0, C = 0;
  std::vector<LayerDesc> layers;
  int split_index = 0;     // first classifier layer
  int embedding_dim = 0;   // L: flattened feature-extractor output width
};

// Shallow time/space convolution net: temporal conv (1,25)x40 with bias,
// spatial conv (E,1)x40 without bias, batch norm, square, average pooling
// (1,75) stride 15, log, dropout 0.5, then a (1,N)xC classifier conv.
ModelSpec build_convnet(int E, int T, int C);

// Compact separable-convolution net: temporal conv (1,64)x8 same padding,
// depthwise (E,1) multiplier 1, separable conv (1,16)->16, two pooling
// stages (1,4) and (1,8), ELU activations, dropout 0.5, dense classifier.
// Time convolutions are bias-free and use same padding.
ModelSpec build_eegnet(int E, int T, int C);

struct LayerCount {
  std::string layer;
  long long params = 0;
  std::optional<long long> reference;  // published value when known
};

struct ParamCountReport {
  std::vector<LayerCount> rows;
  long long total = 0;
  std::optional<long long> reference_total;
  long long classifier_input_width = 0;  // L
  std::string to_csv() const;            // layer,params,reference,delta
};

// Per-layer table plus a machine-readable comparison against the embedded
// reference counts (available for the (22,1125,4) and (3,750,2) builds).
ParamCountReport count_params(const ModelSpec& spec);

// layer-per-line key=value serialization for reproducibility manifests
std::string spec_to_text(const ModelSpec& spec);

// ---------------------------------------------------------------------------

struct ParamEntry {
  std::string name;
  ad::Tensor value;
  ad::Tensor grad;       // same shape, zeroed between steps
  bool trainable = true;
  bool feature_extractor = true;
};

// Named parameter tensors plus batch-norm running statistics. Shared by
// both Siamese branches by identity; single writer (the training loop).
class ParamStore {
 public:
  static ParamStore init(const ModelSpec& spec, Rng& rng);

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<ad::BatchNormState>& bn_states() { return bn_states_; }
  const std::vector<ad::BatchNormState>& bn_states() const { return bn_states_; }

  long long trainable_param_count() const;
  void zero_grads();

  // Deep snapshot of values + buffers (for best-epoch checkpoints).
  struct Snapshot {
    std::vector<ad::Tensor> values;
    std::vector<ad::BatchNormState> bn_states;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

 private:
  std::vector<ParamEntry> entries_;
  std::vector<ad::BatchNormState> bn_states_;
};

struct ForwardResult {
  ad::Tape::Ref logits = ad::Tape::kNone;     // (b, C)
  ad::Tape::Ref embedding = ad::Tape::kNone;  // (b, L)
};

// Executes a spec against a ParamStore on a caller-provided tape. Binding
// creates one leaf per parameter; both branches of a Siamese step reuse the
// same binding, which is what makes the sharing by identity.
class ModelRuntime {
 public:
  ModelRuntime(const ModelSpec& spec, ParamStore& store);

  struct Bound {
    std::vector<ad::Tape::Ref> param_refs;  // aligned with store entries
  };

  Bound bind(ad::Tape& tape, bool trainable) const;

  // batch: (b, 1, E, T). In training mode dropout masks are drawn from
  // `dropout_rng` (required); batch-norm uses batch statistics and updates
  // the running buffers. Log-clamp events accumulate into `clamp_counter`.
  ForwardResult forward(ad::Tape& tape, const Bound& bound, const ad::Tensor& batch,
                        bool training, Rng* dropout_rng,
                        int64_t* clamp_counter = nullptr) const;

  // Adds tape gradients into the store's grad buffers.
  void accumulate_grads(ad::Tape& tape, const Bound& bound) const;

  const ModelSpec& spec() const { return *spec_; }
  ParamStore& store() const { return *store_; }

 private:
  const ModelSpec* spec_;
  ParamStore* store_;
};

// Eval-mode logits and embeddings for a whole set of trials, batched.
ad::Tensor predict_logits(const ModelSpec& spec, ParamStore& store,
                          const ad::Tensor& batch);
ad::Tensor eval_embeddings(const ModelSpec& spec, ParamStore& store,
                           const ad::Tensor& batch);

}  // namespace sdda::models
