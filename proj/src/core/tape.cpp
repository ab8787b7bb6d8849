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
#include "core/tape.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace sdda::ad {

namespace {

void check_labels(const std::vector<int>& labels, int n, int C, const char* op) {
  require(static_cast<int>(labels.size()) == n, ErrorCode::ShapeMismatch,
          std::string(op) + ": expected " + std::to_string(n) + " labels, got " +
              std::to_string(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= C) {
      fail(ErrorCode::LabelRange, std::string(op) + ": label " +
                                      std::to_string(labels[i]) + " at row " +
                                      std::to_string(i) + " outside [0," +
                                      std::to_string(C) + ")");
    }
  }
}

struct ConvGeometry {
  int out_h = 0, out_w = 0;
  int off_h = 0, off_w = 0;
};

ConvGeometry conv_geometry(int H, int W, int kh, int kw, Pad pad, const char* op) {
  ConvGeometry g;
  if (pad == Pad::Valid) {
    require(kh <= H, ErrorCode::ShapeMismatch,
            std::string(op) + ": kernel height " + std::to_string(kh) +
                " exceeds input height " + std::to_string(H) + " (dim 2)");
    require(kw <= W, ErrorCode::ShapeMismatch,
            std::string(op) + ": kernel width " + std::to_string(kw) +
                " exceeds input width " + std::to_string(W) + " (dim 3)");
    g.out_h = H - kh + 1;
    g.out_w = W - kw + 1;
  } else {
    g.out_h = H;
    g.out_w = W;
    g.off_h = (kh - 1) / 2;
    g.off_w = (kw - 1) / 2;
  }
  return g;
}

}  // namespace

Tape::Ref Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size() - 1);
}

Tape::Node& Tape::node(Ref r) { return nodes_[static_cast<size_t>(r)]; }
const Tape::Node& Tape::node(Ref r) const { return nodes_[static_cast<size_t>(r)]; }

void Tape::check_ref(Ref r, const char* what) const {
  require(r >= 0 && r < static_cast<Ref>(nodes_.size()), ErrorCode::InvalidArgument,
          std::string(what) + ": invalid tape reference");
}

bool Tape::any_requires(std::initializer_list<Ref> refs) const {
  for (Ref r : refs) {
    if (r != kNone && node(r).requires_grad) return true;
  }
  return false;
}

void Tape::ensure_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) {
    fail(ErrorCode::NonFinite, std::string(op) + ": non-finite value in forward output");
  }
}

Tape::Ref Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

const Tensor& Tape::value(Ref r) const {
  check_ref(r, "value");
  return node(r).value;
}

bool Tape::requires_grad(Ref r) const {
  check_ref(r, "requires_grad");
  return node(r).requires_grad;
}

Tensor& Tape::grad_buffer(Ref r) {
  Node& n = node(r);
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_ready = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Ref r) const {
  check_ref(r, "grad");
  const Node& n = node(r);
  require(n.grad_ready, ErrorCode::InvalidArgument,
          "gradient not populated; run backward() first");
  return n.grad;
}

bool Tape::has_grad(Ref r) const {
  check_ref(r, "has_grad");
  return node(r).grad_ready;
}

// --------------------------------------------------------------------------
// convolution

Tape::Ref Tape::conv2d(Ref xr, Ref wr, std::optional<Ref> br, Pad pad) {
  check_ref(xr, "conv2d");
  check_ref(wr, "conv2d");
  const Tensor& x = node(xr).value;
  const Tensor& w = node(wr).value;
  require(x.rank() == 4, ErrorCode::ShapeMismatch,
          "conv2d: input must be rank 4 (N,C,H,W), got " + x.shape_str());
  require(w.rank() == 4, ErrorCode::ShapeMismatch,
          "conv2d: weight must be rank 4 (Co,Ci,kh,kw), got " + w.shape_str());
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  require(w.dim(1) == Ci, ErrorCode::ShapeMismatch,
          "conv2d: input has " + std::to_string(Ci) + " channels but weight expects " +
              std::to_string(w.dim(1)) + " (dim 1)");
  const ConvGeometry g = conv_geometry(H, W, kh, kw, pad, "conv2d");
  Ref bias = br.value_or(kNone);
  if (bias != kNone) {
    check_ref(bias, "conv2d");
    const Tensor& b = node(bias).value;
    require(b.rank() == 1 && b.dim(0) == Co, ErrorCode::ShapeMismatch,
            "conv2d: bias shape " + b.shape_str() + " must be (" + std::to_string(Co) + ")");
  }

  Tensor out({N, Co, g.out_h, g.out_w});
  const double* xd = x.data();
  const double* wd = w.data();
  double* yd = out.data();
  const int64_t x_map = static_cast<int64_t>(H) * W;
  const int64_t y_map = static_cast<int64_t>(g.out_h) * g.out_w;
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < Co; ++o) {
      double* ymap = yd + (static_cast<int64_t>(n) * Co + o) * y_map;
      if (bias != kNone) {
        const double bv = node(bias).value[o];
        for (int64_t i = 0; i < y_map; ++i) ymap[i] = bv;
      }
      for (int c = 0; c < Ci; ++c) {
        const double* xmap = xd + (static_cast<int64_t>(n) * Ci + c) * x_map;
        const double* wmap = wd + (static_cast<int64_t>(o) * Ci + c) * kh * kw;
        for (int p = 0; p < kh; ++p) {
          for (int i = 0; i < g.out_h; ++i) {
            const int xi = i + p - g.off_h;
            if (xi < 0 || xi >= H) continue;
            const double* xrow = xmap + static_cast<int64_t>(xi) * W;
            double* yrow = ymap + static_cast<int64_t>(i) * g.out_w;
            for (int q = 0; q < kw; ++q) {
              const double wv = wmap[p * kw + q];
              const int shift = q - g.off_w;
              const int jlo = std::max(0, -shift);
              const int jhi = std::min(g.out_w, W - shift);
              for (int j = jlo; j < jhi; ++j) yrow[j] += wv * xrow[j + shift];
            }
          }
        }
      }
    }
  }
  ensure_finite(out, "conv2d");

  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr, wr, bias};
  nd.requires_grad = any_requires({xr, wr, bias});
  nd.saved_ints = {g.off_h, g.off_w};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0], wr = sn.parents[1], br = sn.parents[2];
    const Tensor& x = t.node(xr).value;
    const Tensor& w = t.node(wr).value;
    const Tensor& dy = sn.grad;
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int OH = sn.value.dim(2), OW = sn.value.dim(3);
    const int off_h = sn.saved_ints[0], off_w = sn.saved_ints[1];
    const bool xreq = t.node(xr).requires_grad;
    const bool wreq = t.node(wr).requires_grad;
    const bool breq = br != kNone && t.node(br).requires_grad;
    double* dxd = xreq ? t.grad_buffer(xr).data() : nullptr;
    double* dwd = wreq ? t.grad_buffer(wr).data() : nullptr;
    double* dbd = breq ? t.grad_buffer(br).data() : nullptr;
    const double* xd = x.data();
    const double* wd = w.data();
    const double* dyd = dy.data();
    const int64_t x_map = static_cast<int64_t>(H) * W;
    const int64_t y_map = static_cast<int64_t>(OH) * OW;
    for (int n = 0; n < N; ++n) {
      for (int o = 0; o < Co; ++o) {
        const double* dymap = dyd + (static_cast<int64_t>(n) * Co + o) * y_map;
        if (dbd) {
          double acc = 0;
          for (int64_t i = 0; i < y_map; ++i) acc += dymap[i];
          dbd[o] += acc;
        }
        if (!xreq && !wreq) continue;
        for (int c = 0; c < Ci; ++c) {
          const double* xmap = xd + (static_cast<int64_t>(n) * Ci + c) * x_map;
          double* dxmap = dxd ? dxd + (static_cast<int64_t>(n) * Ci + c) * x_map : nullptr;
          const int64_t w_off = (static_cast<int64_t>(o) * Ci + c) * kh * kw;
          for (int p = 0; p < kh; ++p) {
            for (int i = 0; i < OH; ++i) {
              const int xi = i + p - off_h;
              if (xi < 0 || xi >= H) continue;
              const double* xrow = xmap + static_cast<int64_t>(xi) * W;
              double* dxrow = dxmap ? dxmap + static_cast<int64_t>(xi) * W : nullptr;
              const double* dyrow = dymap + static_cast<int64_t>(i) * OW;
              for (int q = 0; q < kw; ++q) {
                const int shift = q - off_w;
                const int jlo = std::max(0, -shift);
                const int jhi = std::min(OW, W - shift);
                const double wv = wd[w_off + p * kw + q];
                double acc = 0;
                for (int j = jlo; j < jhi; ++j) {
                  const double d = dyrow[j];
                  acc += d * xrow[j + shift];
                  if (dxrow) dxrow[j + shift] += d * wv;
                }
                if (dwd) dwd[w_off + p * kw + q] += acc;
              }
            }
          }
        }
      }
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::depthwise_conv2d(Ref xr, Ref wr, Pad pad) {
  check_ref(xr, "depthwise_conv2d");
  check_ref(wr, "depthwise_conv2d");
  const Tensor& x = node(xr).value;
  const Tensor& w = node(wr).value;
  require(x.rank() == 4, ErrorCode::ShapeMismatch,
          "depthwise_conv2d: input must be rank 4, got " + x.shape_str());
  require(w.rank() == 3, ErrorCode::ShapeMismatch,
          "depthwise_conv2d: weight must be rank 3 (C,kh,kw), got " + w.shape_str());
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int kh = w.dim(1), kw = w.dim(2);
  require(w.dim(0) == C, ErrorCode::ShapeMismatch,
          "depthwise_conv2d: input has " + std::to_string(C) +
              " maps but weight has " + std::to_string(w.dim(0)) + " (dim 0)");
  const ConvGeometry g = conv_geometry(H, W, kh, kw, pad, "depthwise_conv2d");

  Tensor out({N, C, g.out_h, g.out_w});
  const double* xd = x.data();
  const double* wd = w.data();
  double* yd = out.data();
  const int64_t x_map = static_cast<int64_t>(H) * W;
  const int64_t y_map = static_cast<int64_t>(g.out_h) * g.out_w;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* xmap = xd + (static_cast<int64_t>(n) * C + c) * x_map;
      double* ymap = yd + (static_cast<int64_t>(n) * C + c) * y_map;
      const double* wmap = wd + static_cast<int64_t>(c) * kh * kw;
      for (int p = 0; p < kh; ++p) {
        for (int i = 0; i < g.out_h; ++i) {
          const int xi = i + p - g.off_h;
          if (xi < 0 || xi >= H) continue;
          const double* xrow = xmap + static_cast<int64_t>(xi) * W;
          double* yrow = ymap + static_cast<int64_t>(i) * g.out_w;
          for (int q = 0; q < kw; ++q) {
            const double wv = wmap[p * kw + q];
            const int shift = q - g.off_w;
            const int jlo = std::max(0, -shift);
            const int jhi = std::min(g.out_w, W - shift);
            for (int j = jlo; j < jhi; ++j) yrow[j] += wv * xrow[j + shift];
          }
        }
      }
    }
  }
  ensure_finite(out, "depthwise_conv2d");

  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr, wr};
  nd.requires_grad = any_requires({xr, wr});
  nd.saved_ints = {g.off_h, g.off_w};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0], wr = sn.parents[1];
    const Tensor& x = t.node(xr).value;
    const Tensor& w = t.node(wr).value;
    const Tensor& dy = sn.grad;
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int kh = w.dim(1), kw = w.dim(2);
    const int OH = sn.value.dim(2), OW = sn.value.dim(3);
    const int off_h = sn.saved_ints[0], off_w = sn.saved_ints[1];
    const bool xreq = t.node(xr).requires_grad;
    const bool wreq = t.node(wr).requires_grad;
    double* dxd = xreq ? t.grad_buffer(xr).data() : nullptr;
    double* dwd = wreq ? t.grad_buffer(wr).data() : nullptr;
    const double* xd = x.data();
    const double* wd = w.data();
    const double* dyd = dy.data();
    const int64_t x_map = static_cast<int64_t>(H) * W;
    const int64_t y_map = static_cast<int64_t>(OH) * OW;
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const double* xmap = xd + (static_cast<int64_t>(n) * C + c) * x_map;
        double* dxmap = dxd ? dxd + (static_cast<int64_t>(n) * C + c) * x_map : nullptr;
        const double* dymap = dyd + (static_cast<int64_t>(n) * C + c) * y_map;
        const int64_t w_off = static_cast<int64_t>(c) * kh * kw;
        for (int p = 0; p < kh; ++p) {
          for (int i = 0; i < OH; ++i) {
            const int xi = i + p - off_h;
            if (xi < 0 || xi >= H) continue;
            const double* xrow = xmap + static_cast<int64_t>(xi) * W;
            double* dxrow = dxmap ? dxmap + static_cast<int64_t>(xi) * W : nullptr;
            const double* dyrow = dymap + static_cast<int64_t>(i) * OW;
            for (int q = 0; q < kw; ++q) {
              const int shift = q - off_w;
              const int jlo = std::max(0, -shift);
              const int jhi = std::min(OW, W - shift);
              const double wv = wd[w_off + p * kw + q];
              double acc = 0;
              for (int j = jlo; j < jhi; ++j) {
                const double d = dyrow[j];
                acc += d * xrow[j + shift];
                if (dxrow) dxrow[j + shift] += d * wv;
              }
              if (dwd) dwd[w_off + p * kw + q] += acc;
            }
          }
        }
      }
    }
  };
  return push(std::move(nd));
}

// --------------------------------------------------------------------------
// batch norm

Tape::Ref Tape::batch_norm(Ref xr, Ref gr, Ref br, BatchNormState* state, bool training) {
  check_ref(xr, "batch_norm");
  check_ref(gr, "batch_norm");
  check_ref(br, "batch_norm");
  const Tensor& x = node(xr).value;
  const Tensor& gamma = node(gr).value;
  const Tensor& beta = node(br).value;
  require(x.rank() == 4, ErrorCode::ShapeMismatch,
          "batch_norm: input must be rank 4, got " + x.shape_str());
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(gamma.rank() == 1 && gamma.dim(0) == C, ErrorCode::ShapeMismatch,
          "batch_norm: gamma shape " + gamma.shape_str() + " must be (" + std::to_string(C) + ")");
  require(beta.rank() == 1 && beta.dim(0) == C, ErrorCode::ShapeMismatch,
          "batch_norm: beta shape " + beta.shape_str() + " must be (" + std::to_string(C) + ")");
  const double eps = state ? state->eps : 1e-5;
  const int64_t cnt = static_cast<int64_t>(N) * H * W;
  require(cnt > 0, ErrorCode::ShapeMismatch, "batch_norm: empty input");
  const int64_t map = static_cast<int64_t>(H) * W;

  Tensor out({N, C, H, W});
  Tensor xhat({N, C, H, W});
  Tensor inv({C});
  const double* xd = x.data();
  double* yd = out.data();
  double* xh = xhat.data();

  if (training) {
    for (int c = 0; c < C; ++c) {
      double s = 0;
      for (int n = 0; n < N; ++n) {
        const double* xm = xd + (static_cast<int64_t>(n) * C + c) * map;
        for (int64_t i = 0; i < map; ++i) s += xm[i];
      }
      const double mean = s / static_cast<double>(cnt);
      double v = 0;
      for (int n = 0; n < N; ++n) {
        const double* xm = xd + (static_cast<int64_t>(n) * C + c) * map;
        for (int64_t i = 0; i < map; ++i) {
          const double d = xm[i] - mean;
          v += d * d;
        }
      }
      const double var = v / static_cast<double>(cnt);
      const double iv = 1.0 / std::sqrt(var + eps);
      inv[c] = iv;
      const double g = gamma[c], b = beta[c];
      for (int n = 0; n < N; ++n) {
        const int64_t off = (static_cast<int64_t>(n) * C + c) * map;
        for (int64_t i = 0; i < map; ++i) {
          const double h = (xd[off + i] - mean) * iv;
          xh[off + i] = h;
          yd[off + i] = g * h + b;
        }
      }
      if (state) {
        state->running_mean[c] =
            (1.0 - state->momentum) * state->running_mean[c] + state->momentum * mean;
        state->running_var[c] =
            (1.0 - state->momentum) * state->running_var[c] + state->momentum * var;
      }
    }
  } else {
    require(state != nullptr, ErrorCode::InvalidArgument,
            "batch_norm: eval mode requires initialized running statistics");
    for (int c = 0; c < C; ++c) {
      const double mean = state->running_mean[c];
      const double iv = 1.0 / std::sqrt(state->running_var[c] + eps);
      inv[c] = iv;
      const double g = gamma[c], b = beta[c];
      for (int n = 0; n < N; ++n) {
        const int64_t off = (static_cast<int64_t>(n) * C + c) * map;
        for (int64_t i = 0; i < map; ++i) {
          const double h = (xd[off + i] - mean) * iv;
          xh[off + i] = h;
          yd[off + i] = g * h + b;
        }
      }
    }
  }
  ensure_finite(out, "batch_norm");

  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr, gr, br};
  nd.requires_grad = any_requires({xr, gr, br});
  nd.saved = {std::move(xhat), std::move(inv)};
  nd.saved_ints = {training ? 1 : 0};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0], gr = sn.parents[1], br = sn.parents[2];
    const Tensor& xhat = sn.saved[0];
    const Tensor& inv = sn.saved[1];
    const bool training = sn.saved_ints[0] != 0;
    const Tensor& dy = sn.grad;
    const Tensor& gamma = t.node(gr).value;
    const int N = xhat.dim(0), C = xhat.dim(1);
    const int64_t map = static_cast<int64_t>(xhat.dim(2)) * xhat.dim(3);
    const int64_t cnt = static_cast<int64_t>(N) * map;
    const bool xreq = t.node(xr).requires_grad;
    const bool greq = t.node(gr).requires_grad;
    const bool breq = t.node(br).requires_grad;
    double* dxd = xreq ? t.grad_buffer(xr).data() : nullptr;
    double* dgd = greq ? t.grad_buffer(gr).data() : nullptr;
    double* dbd = breq ? t.grad_buffer(br).data() : nullptr;
    const double* dyd = dy.data();
    const double* xh = xhat.data();
    for (int c = 0; c < C; ++c) {
      double s1 = 0, s2 = 0;
      for (int n = 0; n < N; ++n) {
        const int64_t off = (static_cast<int64_t>(n) * C + c) * map;
        for (int64_t i = 0; i < map; ++i) {
          s1 += dyd[off + i];
          s2 += dyd[off + i] * xh[off + i];
        }
      }
      if (dgd) dgd[c] += s2;
      if (dbd) dbd[c] += s1;
      if (dxd) {
        const double giv = gamma[c] * inv[c];
        if (training) {
          const double m1 = s1 / static_cast<double>(cnt);
          const double m2 = s2 / static_cast<double>(cnt);
          for (int n = 0; n < N; ++n) {
            const int64_t off = (static_cast<int64_t>(n) * C + c) * map;
            for (int64_t i = 0; i < map; ++i) {
              dxd[off + i] += giv * (dyd[off + i] - m1 - xh[off + i] * m2);
            }
          }
        } else {
          for (int n = 0; n < N; ++n) {
            const int64_t off = (static_cast<int64_t>(n) * C + c) * map;
            for (int64_t i = 0; i < map; ++i) dxd[off + i] += giv * dyd[off + i];
          }
        }
      }
    }
  };
  return push(std::move(nd));
}

// --------------------------------------------------------------------------
// elementwise and pooling

Tape::Ref Tape::square(Ref xr) {
  check_ref(xr, "square");
  const Tensor& x = node(xr).value;
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] * x[i];
  ensure_finite(out, "square");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    const Tensor& x = t.node(xr).value;
    Tensor& dx = t.grad_buffer(xr);
    for (int64_t i = 0; i < x.numel(); ++i) dx[i] += 2.0 * x[i] * sn.grad[i];
  };
  return push(std::move(nd));
}

Tape::Ref Tape::log_clamped(Ref xr, double floor_value, int64_t* clamp_counter) {
  check_ref(xr, "log_clamped");
  require(floor_value > 0, ErrorCode::InvalidArgument,
          "log_clamped: floor must be positive");
  const Tensor& x = node(xr).value;
  Tensor out(x.shape());
  int64_t clamped = 0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (x[i] <= floor_value) {
      ++clamped;
      out[i] = std::log(floor_value);
    } else {
      out[i] = std::log(x[i]);
    }
  }
  if (clamp_counter) *clamp_counter += clamped;
  ensure_finite(out, "log_clamped");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.saved_doubles = {floor_value};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    const Tensor& x = t.node(xr).value;
    const double floor_value = sn.saved_doubles[0];
    Tensor& dx = t.grad_buffer(xr);
    for (int64_t i = 0; i < x.numel(); ++i) {
      if (x[i] > floor_value) dx[i] += sn.grad[i] / x[i];
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::elu(Ref xr, double alpha) {
  check_ref(xr, "elu");
  const Tensor& x = node(xr).value;
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    out[i] = x[i] > 0 ? x[i] : alpha * (std::exp(x[i]) - 1.0);
  }
  ensure_finite(out, "elu");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.saved_doubles = {alpha};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    const Tensor& x = t.node(xr).value;
    const double alpha = sn.saved_doubles[0];
    Tensor& dx = t.grad_buffer(xr);
    for (int64_t i = 0; i < x.numel(); ++i) {
      // For x <= 0, d/dx alpha*(e^x - 1) = alpha*e^x = y + alpha.
      dx[i] += sn.grad[i] * (x[i] > 0 ? 1.0 : sn.value[i] + alpha);
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::avg_pool_w(Ref xr, int kernel_w, int stride_w) {
  check_ref(xr, "avg_pool");
  require(kernel_w >= 1 && stride_w >= 1, ErrorCode::InvalidArgument,
          "avg_pool: kernel and stride must be >= 1");
  const Tensor& x = node(xr).value;
  require(x.rank() == 4, ErrorCode::ShapeMismatch,
          "avg_pool: input must be rank 4, got " + x.shape_str());
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  require(kernel_w <= W, ErrorCode::ShapeMismatch,
          "avg_pool: kernel width " + std::to_string(kernel_w) +
              " exceeds input width " + std::to_string(W) + " (dim 3)");
  const int OW = (W - kernel_w) / stride_w + 1;
  Tensor out({N, C, H, OW});
  const double* xd = x.data();
  double* yd = out.data();
  const double scale = 1.0 / kernel_w;
  const int64_t rows = static_cast<int64_t>(N) * C * H;
  for (int64_t r = 0; r < rows; ++r) {
    const double* xrow = xd + r * W;
    double* yrow = yd + r * OW;
    for (int j = 0; j < OW; ++j) {
      double s = 0;
      const int base = j * stride_w;
      for (int q = 0; q < kernel_w; ++q) s += xrow[base + q];
      yrow[j] = s * scale;
    }
  }
  ensure_finite(out, "avg_pool");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.saved_ints = {kernel_w, stride_w};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    const Tensor& x = t.node(xr).value;
    const int kernel_w = sn.saved_ints[0], stride_w = sn.saved_ints[1];
    const int W = x.dim(3), OW = sn.value.dim(3);
    const double scale = 1.0 / kernel_w;
    Tensor& dx = t.grad_buffer(xr);
    const int64_t rows = static_cast<int64_t>(x.dim(0)) * x.dim(1) * x.dim(2);
    for (int64_t r = 0; r < rows; ++r) {
      double* dxrow = dx.data() + r * W;
      const double* dyrow = sn.grad.data() + r * OW;
      for (int j = 0; j < OW; ++j) {
        const double g = dyrow[j] * scale;
        const int base = j * stride_w;
        for (int q = 0; q < kernel_w; ++q) dxrow[base + q] += g;
      }
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::dropout(Ref xr, double p, Tensor mask) {
  check_ref(xr, "dropout");
  require(p >= 0 && p < 1, ErrorCode::InvalidArgument,
          "dropout: p must be in [0,1)");
  const Tensor& x = node(xr).value;
  require(mask.same_shape(x), ErrorCode::ShapeMismatch,
          "dropout: mask shape " + mask.shape_str() + " != input shape " + x.shape_str());
  const double scale = 1.0 / (1.0 - p);
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] * mask[i] * scale;
  ensure_finite(out, "dropout");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.saved = {std::move(mask)};
  nd.saved_doubles = {scale};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    const Tensor& mask = sn.saved[0];
    const double scale = sn.saved_doubles[0];
    Tensor& dx = t.grad_buffer(xr);
    for (int64_t i = 0; i < mask.numel(); ++i) dx[i] += sn.grad[i] * mask[i] * scale;
  };
  return push(std::move(nd));
}

Tape::Ref Tape::affine(Ref xr, Ref wr, Ref br) {
  check_ref(xr, "affine");
  check_ref(wr, "affine");
  check_ref(br, "affine");
  const Tensor& x = node(xr).value;
  const Tensor& w = node(wr).value;
  const Tensor& b = node(br).value;
  require(x.rank() == 2, ErrorCode::ShapeMismatch,
          "affine: input must be rank 2, got " + x.shape_str());
  require(w.rank() == 2, ErrorCode::ShapeMismatch,
          "affine: weight must be rank 2, got " + w.shape_str());
  const int N = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  require(w.dim(1) == in, ErrorCode::ShapeMismatch,
          "affine: input width " + std::to_string(in) + " != weight input dim " +
              std::to_string(w.dim(1)) + " (dim 1)");
  require(b.rank() == 1 && b.dim(0) == out_dim, ErrorCode::ShapeMismatch,
          "affine: bias shape " + b.shape_str() + " must be (" + std::to_string(out_dim) + ")");
  Tensor y({N, out_dim});
  for (int n = 0; n < N; ++n) {
    const double* xrow = x.data() + static_cast<int64_t>(n) * in;
    double* yrow = y.data() + static_cast<int64_t>(n) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      const double* wrow = w.data() + static_cast<int64_t>(o) * in;
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += xrow[i] * wrow[i];
      yrow[o] = acc;
    }
  }
  ensure_finite(y, "affine");
  Node nd;
  nd.value = std::move(y);
  nd.parents = {xr, wr, br};
  nd.requires_grad = any_requires({xr, wr, br});
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0], wr = sn.parents[1], br = sn.parents[2];
    const Tensor& x = t.node(xr).value;
    const Tensor& w = t.node(wr).value;
    const int N = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
    const bool xreq = t.node(xr).requires_grad;
    const bool wreq = t.node(wr).requires_grad;
    const bool breq = t.node(br).requires_grad;
    double* dx = xreq ? t.grad_buffer(xr).data() : nullptr;
    double* dw = wreq ? t.grad_buffer(wr).data() : nullptr;
    double* db = breq ? t.grad_buffer(br).data() : nullptr;
    for (int n = 0; n < N; ++n) {
      const double* xrow = x.data() + static_cast<int64_t>(n) * in;
      const double* dyrow = sn.grad.data() + static_cast<int64_t>(n) * out_dim;
      for (int o = 0; o < out_dim; ++o) {
        const double d = dyrow[o];
        if (db) db[o] += d;
        const double* wrow = w.data() + static_cast<int64_t>(o) * in;
        double* dwrow = dw ? dw + static_cast<int64_t>(o) * in : nullptr;
        double* dxrow = dx ? dx + static_cast<int64_t>(n) * in : nullptr;
        for (int i = 0; i < in; ++i) {
          if (dwrow) dwrow[i] += d * xrow[i];
          if (dxrow) dxrow[i] += d * wrow[i];
        }
      }
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::log_softmax(Ref xr) {
  check_ref(xr, "log_softmax");
  const Tensor& x = node(xr).value;
  require(x.rank() == 2, ErrorCode::ShapeMismatch,
          "log_softmax: input must be rank 2, got " + x.shape_str());
  const int N = x.dim(0), C = x.dim(1);
  require(C >= 1, ErrorCode::ShapeMismatch, "log_softmax: empty rows");
  Tensor out({N, C});
  for (int n = 0; n < N; ++n) {
    const double* row = x.data() + static_cast<int64_t>(n) * C;
    double* orow = out.data() + static_cast<int64_t>(n) * C;
    double m = row[0];
    for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
    double s = 0;
    for (int c = 0; c < C; ++c) s += std::exp(row[c] - m);
    const double lse = m + std::log(s);
    for (int c = 0; c < C; ++c) orow[c] = row[c] - lse;
  }
  ensure_finite(out, "log_softmax");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    const int N = sn.value.dim(0), C = sn.value.dim(1);
    Tensor& dx = t.grad_buffer(xr);
    for (int n = 0; n < N; ++n) {
      const double* dyrow = sn.grad.data() + static_cast<int64_t>(n) * C;
      const double* yrow = sn.value.data() + static_cast<int64_t>(n) * C;
      double* dxrow = dx.data() + static_cast<int64_t>(n) * C;
      double s = 0;
      for (int c = 0; c < C; ++c) s += dyrow[c];
      for (int c = 0; c < C; ++c) dxrow[c] += dyrow[c] - std::exp(yrow[c]) * s;
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::flatten2(Ref xr) {
  check_ref(xr, "flatten2");
  const Tensor& x = node(xr).value;
  require(x.rank() >= 1, ErrorCode::ShapeMismatch, "flatten2: scalar input");
  const int N = x.dim(0);
  require(N > 0, ErrorCode::ShapeMismatch, "flatten2: empty leading dimension");
  const int rest = static_cast<int>(x.numel() / N);
  Node nd;
  nd.value = x.reshaped({N, rest});
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref xr = sn.parents[0];
    if (!t.node(xr).requires_grad) return;
    Tensor& dx = t.grad_buffer(xr);
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += sn.grad[i];
  };
  return push(std::move(nd));
}

Tape::Ref Tape::add(Ref ar, Ref br) {
  check_ref(ar, "add");
  check_ref(br, "add");
  const Tensor& a = node(ar).value;
  const Tensor& b = node(br).value;
  require(a.same_shape(b), ErrorCode::ShapeMismatch,
          "add: shapes differ " + a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  ensure_finite(out, "add");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {ar, br};
  nd.requires_grad = any_requires({ar, br});
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    for (int k = 0; k < 2; ++k) {
      const Ref p = sn.parents[static_cast<size_t>(k)];
      if (!t.node(p).requires_grad) continue;
      Tensor& d = t.grad_buffer(p);
      for (int64_t i = 0; i < d.numel(); ++i) d[i] += sn.grad[i];
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::scale(Ref ar, double s) {
  check_ref(ar, "scale");
  const Tensor& a = node(ar).value;
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  ensure_finite(out, "scale");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {ar};
  nd.requires_grad = node(ar).requires_grad;
  nd.saved_doubles = {s};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref p = sn.parents[0];
    if (!t.node(p).requires_grad) return;
    const double s = sn.saved_doubles[0];
    Tensor& d = t.grad_buffer(p);
    for (int64_t i = 0; i < d.numel(); ++i) d[i] += s * sn.grad[i];
  };
  return push(std::move(nd));
}

Tape::Ref Tape::sum(Ref xr) {
  check_ref(xr, "sum");
  const Tensor& x = node(xr).value;
  double s = 0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
  Tensor out = Tensor::scalar(s);
  ensure_finite(out, "sum");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref p = sn.parents[0];
    if (!t.node(p).requires_grad) return;
    const double g = sn.grad[0];
    Tensor& d = t.grad_buffer(p);
    for (int64_t i = 0; i < d.numel(); ++i) d[i] += g;
  };
  return push(std::move(nd));
}

Tape::Ref Tape::mean(Ref xr) {
  check_ref(xr, "mean");
  const int64_t n = node(xr).value.numel();
  require(n > 0, ErrorCode::ShapeMismatch, "mean: empty tensor");
  return scale(sum(xr), 1.0 / static_cast<double>(n));
}

Tape::Ref Tape::weighted_sum(Ref xr, Tensor weights) {
  check_ref(xr, "weighted_sum");
  const Tensor& x = node(xr).value;
  require(weights.same_shape(x), ErrorCode::ShapeMismatch,
          "weighted_sum: weight shape " + weights.shape_str() + " != input shape " +
              x.shape_str());
  double s = 0;
  for (int64_t i = 0; i < x.numel(); ++i) s += x[i] * weights[i];
  Tensor out = Tensor::scalar(s);
  ensure_finite(out, "weighted_sum");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {xr};
  nd.requires_grad = node(xr).requires_grad;
  nd.saved = {std::move(weights)};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref p = sn.parents[0];
    if (!t.node(p).requires_grad) return;
    const Tensor& w = sn.saved[0];
    const double g = sn.grad[0];
    Tensor& d = t.grad_buffer(p);
    for (int64_t i = 0; i < d.numel(); ++i) d[i] += g * w[i];
  };
  return push(std::move(nd));
}

Tape::Ref Tape::nll_mean(Ref lr, const std::vector<int>& labels) {
  check_ref(lr, "nll_mean");
  const Tensor& logp = node(lr).value;
  require(logp.rank() == 2, ErrorCode::ShapeMismatch,
          "nll_mean: input must be rank 2, got " + logp.shape_str());
  const int N = logp.dim(0), C = logp.dim(1);
  check_labels(labels, N, C, "nll_mean");
  double s = 0;
  for (int n = 0; n < N; ++n) s -= logp[static_cast<int64_t>(n) * C + labels[static_cast<size_t>(n)]];
  Tensor out = Tensor::scalar(s / N);
  ensure_finite(out, "nll_mean");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {lr};
  nd.requires_grad = node(lr).requires_grad;
  std::vector<int> saved_labels = labels;
  nd.backward_fn = [saved_labels](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref p = sn.parents[0];
    if (!t.node(p).requires_grad) return;
    const int N = t.node(p).value.dim(0);
    const int C = t.node(p).value.dim(1);
    const double g = sn.grad[0] / N;
    Tensor& d = t.grad_buffer(p);
    for (int n = 0; n < N; ++n) {
      d[static_cast<int64_t>(n) * C + saved_labels[static_cast<size_t>(n)]] -= g;
    }
  };
  return push(std::move(nd));
}

Tape::Ref Tape::cosine_center(Ref er, const std::vector<int>& labels, const Tensor& centers) {
  check_ref(er, "cosine_center");
  const Tensor& emb = node(er).value;
  require(emb.rank() == 2, ErrorCode::ShapeMismatch,
          "cosine_center: embeddings must be rank 2, got " + emb.shape_str());
  require(centers.rank() == 2, ErrorCode::ShapeMismatch,
          "cosine_center: centers must be rank 2, got " + centers.shape_str());
  const int b = emb.dim(0), L = emb.dim(1), C = centers.dim(0);
  require(centers.dim(1) == L, ErrorCode::ShapeMismatch,
          "cosine_center: embedding width " + std::to_string(L) +
              " != center width " + std::to_string(centers.dim(1)) + " (dim 1)");
  check_labels(labels, b, C, "cosine_center");
  constexpr double kNormFloor = 1e-12;

  Tensor chat({b, L});   // normalized center per row
  Tensor cosv({b});
  Tensor hnorm({b});
  double mean_cos = 0;
  for (int i = 0; i < b; ++i) {
    const double* h = emb.data() + static_cast<int64_t>(i) * L;
    const double* c = centers.data() + static_cast<int64_t>(labels[static_cast<size_t>(i)]) * L;
    double hn = 0, cn = 0;
    for (int k = 0; k < L; ++k) {
      hn += h[k] * h[k];
      cn += c[k] * c[k];
    }
    hn = std::sqrt(hn);
    cn = std::sqrt(cn);
    const double hs = std::max(hn, kNormFloor);
    const double cs = std::max(cn, kNormFloor);
    double dot = 0;
    double* ch = chat.data() + static_cast<int64_t>(i) * L;
    for (int k = 0; k < L; ++k) {
      ch[k] = c[k] / cs;
      dot += (h[k] / hs) * ch[k];
    }
    cosv[i] = dot;
    hnorm[i] = hn;
    mean_cos += dot;
  }
  mean_cos /= b;
  Tensor out = Tensor::scalar(1.0 - mean_cos);
  ensure_finite(out, "cosine_center");
  Node nd;
  nd.value = std::move(out);
  nd.parents = {er};
  nd.requires_grad = node(er).requires_grad;
  nd.saved = {std::move(chat), std::move(cosv), std::move(hnorm)};
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref er = sn.parents[0];
    if (!t.node(er).requires_grad) return;
    const Tensor& emb = t.node(er).value;
    const Tensor& chat = sn.saved[0];
    const Tensor& cosv = sn.saved[1];
    const Tensor& hnorm = sn.saved[2];
    const int b = emb.dim(0), L = emb.dim(1);
    const double g = sn.grad[0];
    Tensor& de = t.grad_buffer(er);
    for (int i = 0; i < b; ++i) {
      const double hn = hnorm[i];
      if (hn <= 1e-12) continue;  // flat: direction undefined at the origin
      const double* h = emb.data() + static_cast<int64_t>(i) * L;
      const double* ch = chat.data() + static_cast<int64_t>(i) * L;
      double* d = de.data() + static_cast<int64_t>(i) * L;
      const double coef = -g / (b * hn);
      const double cs = cosv[i] / hn;
      for (int k = 0; k < L; ++k) d[k] += coef * (ch[k] - cs * h[k]);
    }
  };
  return push(std::move(nd));
}

namespace {

// Averaged Gaussian kernel and its radial derivative weight.
inline double kernel_value(double d2, const std::vector<double>& bw) {
  double k = 0;
  for (double s2 : bw) k += std::exp(-d2 / (2.0 * s2));
  return k / static_cast<double>(bw.size());
}

inline double kernel_weight(double d2, const std::vector<double>& bw) {
  double w = 0;
  for (double s2 : bw) w += std::exp(-d2 / (2.0 * s2)) / s2;
  return w / static_cast<double>(bw.size());
}

}  // namespace

Tape::Ref Tape::mmd(Ref sr, Ref tr, const std::vector<double>& bandwidths) {
  check_ref(sr, "mmd");
  check_ref(tr, "mmd");
  const Tensor& hs = node(sr).value;
  const Tensor& ht = node(tr).value;
  require(hs.rank() == 2 && ht.rank() == 2, ErrorCode::ShapeMismatch,
          "mmd: inputs must be rank 2, got " + hs.shape_str() + " and " + ht.shape_str());
  require(hs.dim(0) >= 1, ErrorCode::InvalidArgument, "mmd: empty batch");
  require(hs.same_shape(ht), ErrorCode::ShapeMismatch,
          "mmd: batch shapes differ " + hs.shape_str() + " vs " + ht.shape_str());
  require(!bandwidths.empty(), ErrorCode::InvalidArgument, "mmd: empty bandwidth set");
  for (double s2 : bandwidths) {
    require(s2 > 0, ErrorCode::InvalidArgument, "mmd: bandwidths must be positive");
  }
  const int b = hs.dim(0), L = hs.dim(1);

  auto pair_d2 = [L](const double* a, const double* c) {
    double d2 = 0;
    for (int k = 0; k < L; ++k) {
      const double d = a[k] - c[k];
      d2 += d * d;
    }
    return d2;
  };
  double s_ss = 0, s_tt = 0, s_st = 0;
  for (int i = 0; i < b; ++i) {
    const double* si = hs.data() + static_cast<int64_t>(i) * L;
    const double* ti = ht.data() + static_cast<int64_t>(i) * L;
    for (int j = 0; j < b; ++j) {
      const double* sj = hs.data() + static_cast<int64_t>(j) * L;
      const double* tj = ht.data() + static_cast<int64_t>(j) * L;
      s_ss += kernel_value(pair_d2(si, sj), bandwidths);
      s_tt += kernel_value(pair_d2(ti, tj), bandwidths);
      s_st += kernel_value(pair_d2(si, tj), bandwidths);
    }
  }
  const double b2 = static_cast<double>(b) * b;
  Tensor out = Tensor::scalar((s_ss + s_tt - 2.0 * s_st) / b2);
  ensure_finite(out, "mmd");

  Node nd;
  nd.value = std::move(out);
  nd.parents = {sr, tr};
  nd.requires_grad = any_requires({sr, tr});
  nd.saved_doubles = bandwidths;
  nd.backward_fn = [](Tape& t, Ref self) {
    const Node& sn = t.node(self);
    const Ref sr = sn.parents[0], tr = sn.parents[1];
    const Tensor& hs = t.node(sr).value;
    const Tensor& ht = t.node(tr).value;
    const std::vector<double>& bw = sn.saved_doubles;
    const int b = hs.dim(0), L = hs.dim(1);
    const double g = sn.grad[0] / (static_cast<double>(b) * b);
    const bool sreq = t.node(sr).requires_grad;
    const bool treq = t.node(tr).requires_grad;
    double* ds = sreq ? t.grad_buffer(sr).data() : nullptr;
    double* dt = treq ? t.grad_buffer(tr).data() : nullptr;
    auto accumulate = [&](const Tensor& a, const Tensor& c, double* da, double sign) {
      // d/da_i of sum_{ij} k(a_i, c_j): each pair contributes -w*(a_i - c_j).
      if (!da) return;
      for (int i = 0; i < b; ++i) {
        const double* ai = a.data() + static_cast<int64_t>(i) * L;
        double* di = da + static_cast<int64_t>(i) * L;
        for (int j = 0; j < b; ++j) {
          const double* cj = c.data() + static_cast<int64_t>(j) * L;
          double d2 = 0;
          for (int k = 0; k < L; ++k) {
            const double d = ai[k] - cj[k];
            d2 += d * d;
          }
          const double w = kernel_weight(d2, bw) * sign * g;
          for (int k = 0; k < L; ++k) di[k] -= w * (ai[k] - cj[k]);
        }
      }
    };
    // L = (1/b^2)(sum_ss + sum_tt - 2 sum_st); the ss/tt sums hit each row
    // twice (as i and as j), hence the factor 2.
    accumulate(hs, hs, ds, 2.0);
    accumulate(hs, ht, ds, -2.0);
    accumulate(ht, ht, dt, 2.0);
    accumulate(ht, hs, dt, -2.0);
  };
  return push(std::move(nd));
}

void Tape::backward(Ref loss) {
  require(!nodes_.empty(), ErrorCode::InvalidArgument,
          "backward before forward: tape is empty");
  require(!backward_done_, ErrorCode::InvalidArgument,
          "backward already run on this tape");
  check_ref(loss, "backward");
  const Node& ln = node(loss);
  require(ln.value.numel() == 1, ErrorCode::InvalidArgument,
          "backward: loss must be scalar, got shape " + ln.value.shape_str());
  backward_done_ = true;
  grad_buffer(loss)[0] = 1.0;
  for (Ref r = loss; r >= 0; --r) {
    Node& n = node(r);
    if (!n.requires_grad || !n.grad_ready || !n.backward_fn) continue;
    n.backward_fn(*this, r);
  }
}

}  // namespace sdda::ad
