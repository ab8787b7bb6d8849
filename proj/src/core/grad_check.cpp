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
#include "core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "core/errors.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

namespace sdda::ad {

namespace {

constexpr double kStep = 1e-5;

using BuildFn = std::function<Tape::Ref(Tape&, const std::vector<Tape::Ref>&)>;

struct Case {
  std::vector<Tensor> inputs;  // differentiable inputs, perturbed one by one
  BuildFn build;               // must be re-entrant and mutation free
};

std::vector<int> random_shape(Rng& rng, int max_rank, int max_dim) {
  const int rank = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(max_rank)));
  std::vector<int> s(static_cast<size_t>(rank));
  for (auto& d : s) d = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(max_dim)));
  return s;
}

Case make_case(const std::string& kind, const std::vector<int>& shape_arg, uint64_t seed) {
  Rng rng = Rng::from_label(seed, "grad_check/" + kind);
  Case c;

  // Scalar functional over the op output: sum(out .* w) with fixed random w.
  auto reduce = [](Tape& t, Tape::Ref out, std::shared_ptr<Tensor> w) {
    return t.weighted_sum(out, *w);
  };

  if (kind == "square" || kind == "elu" || kind == "log_clamped") {
    std::vector<int> shape = shape_arg.empty() ? random_shape(rng, 3, 6) : shape_arg;
    Tensor x = Tensor::randn(shape, rng);
    if (kind == "log_clamped") {
      for (int64_t i = 0; i < x.numel(); ++i) x[i] = std::abs(x[i]) + 0.1;
    }
    auto w = std::make_shared<Tensor>(Tensor::randn(shape, rng));
    c.inputs = {std::move(x)};
    c.build = [kind, w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      Tape::Ref out;
      if (kind == "square") {
        out = t.square(in[0]);
      } else if (kind == "elu") {
        out = t.elu(in[0]);
      } else {
        out = t.log_clamped(in[0], 1e-6, nullptr);
      }
      return reduce(t, out, w);
    };
    return c;
  }

  if (kind == "avg_pool") {
    const int N = 2, C = 2, H = 2;
    const int W = 6 + static_cast<int>(rng.below(8));
    const int k = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(W)));
    const int s = 1 + static_cast<int>(rng.below(3));
    Tensor x = Tensor::randn({N, C, H, W}, rng);
    const int OW = (W - k) / s + 1;
    auto w = std::make_shared<Tensor>(Tensor::randn({N, C, H, OW}, rng));
    c.inputs = {std::move(x)};
    c.build = [k, s, w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      return reduce(t, t.avg_pool_w(in[0], k, s), w);
    };
    return c;
  }

  if (kind == "dropout") {
    std::vector<int> shape = shape_arg.empty() ? random_shape(rng, 3, 6) : shape_arg;
    Tensor x = Tensor::randn(shape, rng);
    const double p = 0.3;
    auto mask = std::make_shared<Tensor>(Tensor(shape));
    for (int64_t i = 0; i < mask->numel(); ++i) (*mask)[i] = rng.uniform() < p ? 0.0 : 1.0;
    auto w = std::make_shared<Tensor>(Tensor::randn(shape, rng));
    c.inputs = {std::move(x)};
    c.build = [p, mask, w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      return reduce(t, t.dropout(in[0], p, *mask), w);
    };
    return c;
  }

  if (kind == "affine") {
    const int N = 3, in_dim = 4 + static_cast<int>(rng.below(4));
    const int out_dim = 2 + static_cast<int>(rng.below(4));
    Tensor x = Tensor::randn({N, in_dim}, rng);
    Tensor wt = Tensor::randn({out_dim, in_dim}, rng);
    Tensor b = Tensor::randn({out_dim}, rng);
    auto w = std::make_shared<Tensor>(Tensor::randn({N, out_dim}, rng));
    c.inputs = {std::move(x), std::move(wt), std::move(b)};
    c.build = [w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      return reduce(t, t.affine(in[0], in[1], in[2]), w);
    };
    return c;
  }

  if (kind == "conv2d_valid" || kind == "conv2d_same") {
    const Pad pad = kind == "conv2d_same" ? Pad::Same : Pad::Valid;
    const int N = 2, Ci = 1 + static_cast<int>(rng.below(2));
    const int Co = 1 + static_cast<int>(rng.below(3));
    const int H = 3 + static_cast<int>(rng.below(3));
    const int W = 6 + static_cast<int>(rng.below(5));
    const int kh = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(H)));
    const int kw = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(W)));
    Tensor x = Tensor::randn({N, Ci, H, W}, rng);
    Tensor wt = Tensor::randn({Co, Ci, kh, kw}, rng);
    Tensor b = Tensor::randn({Co}, rng);
    const int OH = pad == Pad::Valid ? H - kh + 1 : H;
    const int OW = pad == Pad::Valid ? W - kw + 1 : W;
    auto w = std::make_shared<Tensor>(Tensor::randn({N, Co, OH, OW}, rng));
    c.inputs = {std::move(x), std::move(wt), std::move(b)};
    c.build = [pad, w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      return reduce(t, t.conv2d(in[0], in[1], in[2], pad), w);
    };
    return c;
  }

  if (kind == "depthwise_valid" || kind == "depthwise_same") {
    const Pad pad = kind == "depthwise_same" ? Pad::Same : Pad::Valid;
    const int N = 2, C = 2 + static_cast<int>(rng.below(3));
    const int H = 2 + static_cast<int>(rng.below(3));
    const int W = 6 + static_cast<int>(rng.below(5));
    const int kh = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(H)));
    const int kw = 1 + static_cast<int>(rng.below(static_cast<uint32_t>(W)));
    Tensor x = Tensor::randn({N, C, H, W}, rng);
    Tensor wt = Tensor::randn({C, kh, kw}, rng);
    const int OH = pad == Pad::Valid ? H - kh + 1 : H;
    const int OW = pad == Pad::Valid ? W - kw + 1 : W;
    auto w = std::make_shared<Tensor>(Tensor::randn({N, C, OH, OW}, rng));
    c.inputs = {std::move(x), std::move(wt)};
    c.build = [pad, w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      return reduce(t, t.depthwise_conv2d(in[0], in[1], pad), w);
    };
    return c;
  }

  if (kind == "batch_norm_train" || kind == "batch_norm_eval") {
    const bool training = kind == "batch_norm_train";
    const int N = 16, C = 3, H = 2, W = 5;
    Tensor x = Tensor::randn({N, C, H, W}, rng);
    Tensor gamma({C});
    Tensor beta = Tensor::randn({C}, rng);
    for (int i = 0; i < C; ++i) gamma[i] = 1.0 + 0.2 * rng.normal();
    auto state = std::make_shared<BatchNormState>();
    state->running_mean = Tensor::randn({C}, rng);
    state->running_var = Tensor({C});
    for (int i = 0; i < C; ++i) state->running_var[i] = 0.5 + rng.uniform();
    auto w = std::make_shared<Tensor>(Tensor::randn({N, C, H, W}, rng));
    c.inputs = {std::move(x), std::move(gamma), std::move(beta)};
    c.build = [training, state, w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      // Train mode runs without a state so the check never mutates it.
      BatchNormState* s = training ? nullptr : state.get();
      return reduce(t, t.batch_norm(in[0], in[1], in[2], s, training), w);
    };
    return c;
  }

  if (kind == "log_softmax") {
    const int N = 4, C = 3 + static_cast<int>(rng.below(4));
    Tensor x = Tensor::randn({N, C}, rng);
    auto w = std::make_shared<Tensor>(Tensor::randn({N, C}, rng));
    c.inputs = {std::move(x)};
    c.build = [w, reduce](Tape& t, const std::vector<Tape::Ref>& in) {
      return reduce(t, t.log_softmax(in[0]), w);
    };
    return c;
  }

  if (kind == "softmax_loss") {
    const int N = 5, C = 2 + static_cast<int>(rng.below(4));
    Tensor logits = Tensor::randn({N, C}, rng);
    auto labels = std::make_shared<std::vector<int>>();
    for (int i = 0; i < N; ++i) labels->push_back(static_cast<int>(rng.below(static_cast<uint32_t>(C))));
    c.inputs = {std::move(logits)};
    c.build = [labels](Tape& t, const std::vector<Tape::Ref>& in) {
      return t.nll_mean(t.log_softmax(in[0]), *labels);
    };
    return c;
  }

  if (kind == "cosine_center_loss") {
    const int b = 4, L = 5 + static_cast<int>(rng.below(4));
    const int C = 3;
    Tensor emb = Tensor::randn({b, L}, rng);
    auto centers = std::make_shared<Tensor>(Tensor::randn({C, L}, rng));
    auto labels = std::make_shared<std::vector<int>>();
    for (int i = 0; i < b; ++i) labels->push_back(static_cast<int>(rng.below(C)));
    c.inputs = {std::move(emb)};
    c.build = [centers, labels](Tape& t, const std::vector<Tape::Ref>& in) {
      return t.cosine_center(in[0], *labels, *centers);
    };
    return c;
  }

  if (kind == "mmd_loss") {
    const int b = 4, L = 3 + static_cast<int>(rng.below(4));
    Tensor hs = Tensor::randn({b, L}, rng);
    Tensor ht = Tensor::randn({b, L}, rng);
    for (int64_t i = 0; i < ht.numel(); ++i) ht[i] += 0.5;
    auto bw = std::make_shared<std::vector<double>>(
        std::vector<double>{0.5, 1.0, 2.0});
    c.inputs = {std::move(hs), std::move(ht)};
    c.build = [bw](Tape& t, const std::vector<Tape::Ref>& in) {
      return t.mmd(in[0], in[1], *bw);
    };
    return c;
  }

  fail(ErrorCode::InvalidArgument, "grad_check: unknown op kind '" + kind + "'");
}

}  // namespace

double grad_check(const std::string& op_kind, const std::vector<int>& input_shape,
                  uint64_t seed) {
  Case c = make_case(op_kind, input_shape, seed);

  Tape tape;
  std::vector<Tape::Ref> refs;
  refs.reserve(c.inputs.size());
  for (const Tensor& in : c.inputs) refs.push_back(tape.leaf(in, true));
  Tape::Ref loss = c.build(tape, refs);
  tape.backward(loss);
  std::vector<Tensor> analytic;
  for (Tape::Ref r : refs) {
    analytic.push_back(tape.has_grad(r) ? tape.grad(r) : Tensor::zeros(tape.value(r).shape()));
  }

  auto eval = [&](const std::vector<Tensor>& inputs) {
    Tape t;
    std::vector<Tape::Ref> rs;
    rs.reserve(inputs.size());
    for (const Tensor& in : inputs) rs.push_back(t.leaf(in, false));
    return t.value(c.build(t, rs)).item();
  };

  double max_rel = 0;
  std::vector<Tensor> inputs = c.inputs;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    for (int64_t k = 0; k < inputs[ti].numel(); ++k) {
      const double orig = inputs[ti][k];
      inputs[ti][k] = orig + kStep;
      const double fp = eval(inputs);
      inputs[ti][k] = orig - kStep;
      const double fm = eval(inputs);
      inputs[ti][k] = orig;
      const double fd = (fp - fm) / (2.0 * kStep);
      const double a = analytic[ti][k];
      const double denom = std::max({1e-3, std::abs(a), std::abs(fd)});
      max_rel = std::max(max_rel, std::abs(a - fd) / denom);
    }
  }
  return max_rel;
}

double grad_check(const std::string& op_kind, uint64_t seed) {
  return grad_check(op_kind, {}, seed);
}

const std::vector<std::string>& grad_check_kinds() {
  static const std::vector<std::string> kinds = {
      "square",         "elu",
      "log_clamped",    "avg_pool",
      "dropout",        "affine",
      "conv2d_valid",   "conv2d_same",
      "depthwise_valid", "depthwise_same",
      "batch_norm_train", "batch_norm_eval",
      "log_softmax",    "softmax_loss",
      "cosine_center_loss", "mmd_loss",
  };
  return kinds;
}

}  // namespace sdda::ad
