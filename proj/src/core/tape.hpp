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
#include <functional>
#include <optional>
#include <vector>

#include "core/tensor.hpp"

namespace sdda::ad {

enum class Pad { Valid, Same };

// Running batch-norm statistics. Owned by the parameter store, mutated by
// train-mode forward passes, read by eval-mode passes.
struct BatchNormState {
  Tensor running_mean;  // (C)
  Tensor running_var;   // (C), biased batch variance
  double momentum = 0.1;
  double eps = 1e-5;
};

// Reverse-mode tape over the kernel set the reference networks need.
// Records every forward op in topological order; one backward sweep from a
// scalar loss populates gradients for every reachable node that requires
// them. Tensors on the tape are never mutated after recording.
class Tape {
 public:
  using Ref = int;
  static constexpr Ref kNone = -1;

  Ref leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(Ref r) const;
  const Tensor& grad(Ref r) const;  // valid after backward()
  bool has_grad(Ref r) const;       // false if no gradient flowed to r
  bool requires_grad(Ref r) const;
  size_t size() const { return nodes_.size(); }

  // 2-D cross-correlation, no kernel flip. x:(N,Ci,H,W) w:(Co,Ci,kh,kw)
  // bias optional (Co). Valid: out dim = in - k + 1. Same: out dim = in.
  Ref conv2d(Ref x, Ref w, std::optional<Ref> bias, Pad pad);
  // Depthwise variant, multiplier 1. x:(N,C,H,W) w:(C,kh,kw).
  Ref depthwise_conv2d(Ref x, Ref w, Pad pad);
  // Per-feature-map batch norm. x:(N,C,H,W) gamma,beta:(C).
  Ref batch_norm(Ref x, Ref gamma, Ref beta, BatchNormState* state, bool training);
  Ref square(Ref x);
  // log(max(x, floor)); clamp events are counted, not errors.
  Ref log_clamped(Ref x, double floor_value, int64_t* clamp_counter);
  Ref elu(Ref x, double alpha = 1.0);
  // Width-only average pooling with independent kernel / stride.
  Ref avg_pool_w(Ref x, int kernel_w, int stride_w);
  // Inverted dropout; the 0/1 mask is drawn by the caller so that a forward
  // pass is a deterministic function of (inputs, params, mask).
  Ref dropout(Ref x, double p, Tensor mask);
  // x:(N,in) w:(out,in) bias:(out) -> (N,out)
  Ref affine(Ref x, Ref w, Ref bias);
  Ref log_softmax(Ref x);  // (N,C), row-wise, max-subtraction stable
  Ref flatten2(Ref x);     // (N, rest)

  Ref add(Ref a, Ref b);
  Ref scale(Ref a, double s);
  Ref sum(Ref x);
  Ref mean(Ref x);
  // sum(x .* weights) with constant weights; scalar output.
  Ref weighted_sum(Ref x, Tensor weights);

  // mean over rows of -logp[i, labels[i]]; logp is a log-softmax output.
  Ref nll_mean(Ref logp, const std::vector<int>& labels);
  // 1 - mean_i cos(emb_i, centers[labels[i]]); gradients flow to emb only.
  Ref cosine_center(Ref emb, const std::vector<int>& labels, const Tensor& centers);
  // Biased V-statistic MMD with an averaged Gaussian kernel family;
  // `bandwidths` are the sigma^2 values of k(a,b) = exp(-|a-b|^2/(2 s^2)).
  Ref mmd(Ref hs, Ref ht, const std::vector<double>& bandwidths);

  void backward(Ref loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<Ref> parents;
    std::function<void(Tape&, Ref)> backward_fn;
    std::vector<Tensor> saved;
    std::vector<int> saved_ints;
    std::vector<double> saved_doubles;
  };

  Ref push(Node node);
  Node& node(Ref r);
  const Node& node(Ref r) const;
  Tensor& grad_buffer(Ref r);
  void check_ref(Ref r, const char* what) const;
  bool any_requires(std::initializer_list<Ref> refs) const;
  static void ensure_finite(const Tensor& t, const char* op);

  std::vector<Node> nodes_;
  bool backward_done_ = false;

  friend struct TapeOps;
};

}  // namespace sdda::ad
