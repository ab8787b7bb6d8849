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
#include "core/models.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "core/errors.hpp"

namespace sdda::models {

namespace {

constexpr double kLogFloor = 1e-6;
constexpr double kDropoutP = 0.5;

struct ShapeCursor {
  int maps = 1, h = 0, w = 0;
};

void apply_layer_shape(const std::string& arch, LayerDesc& layer, ShapeCursor& s) {
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::ShapeMismatch,
         arch + ": layer '" + layer.name + "' " + why + " (input " +
             std::to_string(s.maps) + "x" + std::to_string(s.h) + "x" +
             std::to_string(s.w) + ")");
  };
  switch (layer.kind) {
    case LayerKind::Conv2d:
      if (layer.in_maps != s.maps) bad("expects " + std::to_string(layer.in_maps) + " input maps");
      if (layer.pad == ad::Pad::Valid) {
        if (layer.kh > s.h) bad("kernel height " + std::to_string(layer.kh) + " exceeds input height");
        if (layer.kw > s.w) bad("kernel width " + std::to_string(layer.kw) + " exceeds input width");
        s.h = s.h - layer.kh + 1;
        s.w = s.w - layer.kw + 1;
      }
      s.maps = layer.out_maps;
      break;
    case LayerKind::DepthwiseConv2d:
      if (layer.in_maps != s.maps) bad("expects " + std::to_string(layer.in_maps) + " input maps");
      if (layer.pad == ad::Pad::Valid) {
        if (layer.kh > s.h) bad("kernel height " + std::to_string(layer.kh) + " exceeds input height");
        if (layer.kw > s.w) bad("kernel width " + std::to_string(layer.kw) + " exceeds input width");
        s.h = s.h - layer.kh + 1;
        s.w = s.w - layer.kw + 1;
      }
      break;
    case LayerKind::AvgPool:
      if (layer.kw > s.w) bad("pool kernel " + std::to_string(layer.kw) + " exceeds input width");
      s.w = (s.w - layer.kw) / layer.stride + 1;
      break;
    case LayerKind::FullyConnected:
      if (layer.in_maps != s.maps * s.h * s.w) bad("expects input width " + std::to_string(layer.in_maps));
      s.maps = layer.out_maps;
      s.h = 1;
      s.w = 1;
      break;
    case LayerKind::Flatten:
      s.maps = s.maps * s.h * s.w;
      s.h = 1;
      s.w = 1;
      break;
    default:
      break;  // shape preserving
  }
  layer.out_maps_actual = s.maps;
  layer.out_h = s.h;
  layer.out_w = s.w;
}

void push_layer(ModelSpec& spec, ShapeCursor& s, LayerDesc layer) {
  if (layer.count_group.empty()) layer.count_group = layer.name;
  apply_layer_shape(spec.arch, layer, s);
  spec.layers.push_back(std::move(layer));
}

long long layer_param_count(const LayerDesc& l) {
  switch (l.kind) {
    case LayerKind::Conv2d:
      return static_cast<long long>(l.out_maps) * l.in_maps * l.kh * l.kw +
             (l.bias ? l.out_maps : 0);
    case LayerKind::DepthwiseConv2d:
      return static_cast<long long>(l.in_maps) * l.kh * l.kw;
    case LayerKind::BatchNorm:
      return 2LL * l.in_maps;
    case LayerKind::FullyConnected:
      return static_cast<long long>(l.out_maps) * l.in_maps + (l.bias ? l.out_maps : 0);
    default:
      return 0;
  }
}

// Published per-layer counts for the two reference builds, keyed by count
// group. First value: (E,T,C) = (22,1125,4); second: (3,750,2).
struct ReferenceCounts {
  std::map<std::string, std::pair<long long, long long>> by_group;
  long long total_a = 0, total_b = 0;
};

const ReferenceCounts* reference_counts(const std::string& arch) {
  static const ReferenceCounts convnet{
      {
          {"temporal_conv", {1040, 1040}},
          {"spatial_conv", {35200, 4800}},
          {"batchnorm", {80, 80}},
          {"classifier_conv", {11044, 4162}},
      },
      47364,
      10082,
  };
  static const ReferenceCounts eegnet{
      {
          {"temporal_conv", {512, 512}},
          {"batchnorm_1", {16, 16}},
          {"depthwise_conv", {176, 24}},
          {"batchnorm_2", {16, 16}},
          {"separable_conv", {272, 128}},
          {"batchnorm_3", {32, 32}},
          {"fully_connected", {1988, 738}},
      },
      3012,
      1610,
  };
  if (arch == "convnet") return &convnet;
  if (arch == "eegnet") return &eegnet;
  return nullptr;
}

std::string pad_name(ad::Pad p) { return p == ad::Pad::Same ? "same" : "valid"; }

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::DepthwiseConv2d: return "depthwise_conv2d";
    case LayerKind::BatchNorm: return "batch_norm";
    case LayerKind::Square: return "square";
    case LayerKind::LogActivation: return "log";
    case LayerKind::Elu: return "elu";
    case LayerKind::AvgPool: return "avg_pool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::FullyConnected: return "fully_connected";
  }
  return "unknown";
}

}  // namespace

ModelSpec build_convnet(int E, int T, int C) {
  require(E >= 1 && C >= 2, ErrorCode::InvalidArgument,
          "build_convnet: need E >= 1 and C >= 2");
  require(T >= 1, ErrorCode::InvalidArgument, "build_convnet: empty time axis");
  // T must exceed 25 + 75; shorter inputs fail in the layer-shape walk below
  // with the first offending layer named.
  ModelSpec spec;
  spec.arch = "convnet";
  spec.E = E;
  spec.T = T;
  spec.C = C;
  ShapeCursor s{1, E, T};

  {
    LayerDesc l{LayerKind::Conv2d, "temporal_conv", "", 1, 25, 1, 40};
    l.bias = true;
    push_layer(spec, s, l);
  }
  {
    LayerDesc l{LayerKind::Conv2d, "spatial_conv", "", E, 1, 40, 40};
    l.bias = false;
    push_layer(spec, s, l);
  }
  push_layer(spec, s, LayerDesc{LayerKind::BatchNorm, "batchnorm", "", 1, 1, 40, 40});
  push_layer(spec, s, LayerDesc{LayerKind::Square, "square", ""});
  {
    LayerDesc l{LayerKind::AvgPool, "avg_pool", "", 1, 75};
    l.stride = 15;
    push_layer(spec, s, l);
  }
  push_layer(spec, s, LayerDesc{LayerKind::LogActivation, "log", ""});
  {
    LayerDesc l{LayerKind::Dropout, "dropout", ""};
    l.p = kDropoutP;
    push_layer(spec, s, l);
  }
  spec.split_index = static_cast<int>(spec.layers.size());
  spec.embedding_dim = s.maps * s.h * s.w;
  {
    // classifier convolution spans the whole remaining time width
    LayerDesc l{LayerKind::Conv2d, "classifier_conv", "", 1, s.w, 40, C};
    l.bias = true;
    push_layer(spec, s, l);
  }
  push_layer(spec, s, LayerDesc{LayerKind::Flatten, "flatten_logits", ""});
  return spec;
}

ModelSpec build_eegnet(int E, int T, int C) {
  require(E >= 1 && C >= 2, ErrorCode::InvalidArgument,
          "build_eegnet: need E >= 1 and C >= 2");
  require(T >= 64, ErrorCode::InvalidArgument,
          "build_eegnet: T must be at least 64 for the temporal conv, got " +
              std::to_string(T));
  ModelSpec spec;
  spec.arch = "eegnet";
  spec.E = E;
  spec.T = T;
  spec.C = C;
  ShapeCursor s{1, E, T};

  {
    LayerDesc l{LayerKind::Conv2d, "temporal_conv", "", 1, 64, 1, 8};
    l.pad = ad::Pad::Same;
    l.bias = false;
    push_layer(spec, s, l);
  }
  push_layer(spec, s, LayerDesc{LayerKind::BatchNorm, "batchnorm_1", "", 1, 1, 8, 8});
  {
    LayerDesc l{LayerKind::DepthwiseConv2d, "depthwise_conv", "", E, 1, 8, 8};
    push_layer(spec, s, l);
  }
  push_layer(spec, s, LayerDesc{LayerKind::BatchNorm, "batchnorm_2", "", 1, 1, 8, 8});
  push_layer(spec, s, LayerDesc{LayerKind::Elu, "elu_1", ""});
  {
    LayerDesc l{LayerKind::AvgPool, "avg_pool_1", "", 1, 4};
    l.stride = 4;
    push_layer(spec, s, l);
  }
  {
    LayerDesc l{LayerKind::Dropout, "dropout_1", ""};
    l.p = kDropoutP;
    push_layer(spec, s, l);
  }
  {
    LayerDesc l{LayerKind::DepthwiseConv2d, "separable_depthwise", "separable_conv", 1, 16, 8, 8};
    l.pad = ad::Pad::Same;
    push_layer(spec, s, l);
  }
  {
    LayerDesc l{LayerKind::Conv2d, "separable_pointwise", "separable_conv", 1, 1, 8, 16};
    l.bias = false;
    push_layer(spec, s, l);
  }
  push_layer(spec, s, LayerDesc{LayerKind::BatchNorm, "batchnorm_3", "", 1, 1, 16, 16});
  push_layer(spec, s, LayerDesc{LayerKind::Elu, "elu_2", ""});
  {
    LayerDesc l{LayerKind::AvgPool, "avg_pool_2", "", 1, 8};
    l.stride = 8;
    push_layer(spec, s, l);
  }
  {
    LayerDesc l{LayerKind::Dropout, "dropout_2", ""};
    l.p = kDropoutP;
    push_layer(spec, s, l);
  }
  spec.split_index = static_cast<int>(spec.layers.size());
  spec.embedding_dim = s.maps * s.h * s.w;
  push_layer(spec, s, LayerDesc{LayerKind::Flatten, "flatten", ""});
  {
    LayerDesc l{LayerKind::FullyConnected, "fully_connected", "", 1, 1, spec.embedding_dim, C};
    l.bias = true;
    push_layer(spec, s, l);
  }
  return spec;
}

ParamCountReport count_params(const ModelSpec& spec) {
  ParamCountReport report;
  report.classifier_input_width = spec.embedding_dim;

  const ReferenceCounts* refs = reference_counts(spec.arch);
  int dataset = -1;  // 0: (22,1125,4)  1: (3,750,2)
  if (spec.E == 22 && spec.T == 1125 && spec.C == 4) dataset = 0;
  if (spec.E == 3 && spec.T == 750 && spec.C == 2) dataset = 1;

  std::vector<std::string> order;
  std::map<std::string, long long> grouped;
  for (const LayerDesc& l : spec.layers) {
    const long long p = layer_param_count(l);
    if (p == 0) continue;
    if (grouped.find(l.count_group) == grouped.end()) order.push_back(l.count_group);
    grouped[l.count_group] += p;
  }
  for (const std::string& g : order) {
    LayerCount row;
    row.layer = g;
    row.params = grouped[g];
    if (refs && dataset >= 0) {
      auto it = refs->by_group.find(g);
      if (it != refs->by_group.end()) {
        row.reference = dataset == 0 ? it->second.first : it->second.second;
      }
    }
    report.total += row.params;
    report.rows.push_back(std::move(row));
  }
  if (refs && dataset >= 0) {
    report.reference_total = dataset == 0 ? refs->total_a : refs->total_b;
  }
  return report;
}

std::string ParamCountReport::to_csv() const {
  std::ostringstream out;
  out << "layer,params,reference,delta\n";
  for (const auto& row : rows) {
    out << row.layer << "," << row.params << ",";
    if (row.reference) {
      out << *row.reference << "," << (row.params - *row.reference);
    } else {
      out << ",";
    }
    out << "\n";
  }
  out << "total," << total << ",";
  if (reference_total) {
    out << *reference_total << "," << (total - *reference_total);
  } else {
    out << ",";
  }
  out << "\n";
  return out.str();
}

std::string spec_to_text(const ModelSpec& spec) {
  std::ostringstream out;
  out << "arch = " << spec.arch << "\n";
  out << "channels = " << spec.E << "\n";
  out << "samples = " << spec.T << "\n";
  out << "classes = " << spec.C << "\n";
  out << "embedding_dim = " << spec.embedding_dim << "\n";
  out << "split_index = " << spec.split_index << "\n";
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& l = spec.layers[i];
    out << "layer_" << i << " = name=" << l.name << " kind=" << kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Conv2d:
      case LayerKind::DepthwiseConv2d:
        out << " kernel=" << l.kh << "x" << l.kw << " in=" << l.in_maps
            << " out=" << l.out_maps << " pad=" << pad_name(l.pad)
            << " bias=" << (l.bias ? "true" : "false");
        break;
      case LayerKind::BatchNorm:
        out << " maps=" << l.in_maps;
        break;
      case LayerKind::AvgPool:
        out << " kernel=1x" << l.kw << " stride=" << l.stride;
        break;
      case LayerKind::Dropout:
        out << " p=" << l.p;
        break;
      case LayerKind::FullyConnected:
        out << " in=" << l.in_maps << " out=" << l.out_maps;
        break;
      default:
        break;
    }
    out << " shape=" << l.out_maps_actual << "x" << l.out_h << "x" << l.out_w << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

ParamStore ParamStore::init(const ModelSpec& spec, Rng& rng) {
  ParamStore store;
  for (size_t idx = 0; idx < spec.layers.size(); ++idx) {
    const LayerDesc& l = spec.layers[idx];
    const bool fe = static_cast<int>(idx) < spec.split_index;
    auto glorot = [&](std::vector<int> shape, int fan_in, int fan_out) {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      return ad::Tensor::rand_uniform(std::move(shape), -limit, limit, rng);
    };
    auto add_entry = [&](const std::string& suffix, ad::Tensor value) {
      ParamEntry e;
      e.name = l.name + "." + suffix;
      e.grad = ad::Tensor::zeros(value.shape());
      e.value = std::move(value);
      e.trainable = true;
      e.feature_extractor = fe;
      store.entries_.push_back(std::move(e));
    };
    switch (l.kind) {
      case LayerKind::Conv2d: {
        add_entry("weight", glorot({l.out_maps, l.in_maps, l.kh, l.kw},
                                   l.in_maps * l.kh * l.kw, l.out_maps * l.kh * l.kw));
        if (l.bias) add_entry("bias", ad::Tensor::zeros({l.out_maps}));
        break;
      }
      case LayerKind::DepthwiseConv2d: {
        add_entry("weight", glorot({l.in_maps, l.kh, l.kw}, l.kh * l.kw, l.kh * l.kw));
        break;
      }
      case LayerKind::BatchNorm: {
        add_entry("gamma", ad::Tensor::full({l.in_maps}, 1.0));
        add_entry("beta", ad::Tensor::zeros({l.in_maps}));
        ad::BatchNormState st;
        st.running_mean = ad::Tensor::zeros({l.in_maps});
        st.running_var = ad::Tensor::full({l.in_maps}, 1.0);
        store.bn_states_.push_back(std::move(st));
        break;
      }
      case LayerKind::FullyConnected: {
        add_entry("weight", glorot({l.out_maps, l.in_maps}, l.in_maps, l.out_maps));
        if (l.bias) add_entry("bias", ad::Tensor::zeros({l.out_maps}));
        break;
      }
      default:
        break;
    }
  }
  return store;
}

long long ParamStore::trainable_param_count() const {
  long long n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.value.numel();
  }
  return n;
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

ParamStore::Snapshot ParamStore::snapshot() const {
  Snapshot s;
  s.values.reserve(entries_.size());
  for (const auto& e : entries_) s.values.push_back(e.value);
  s.bn_states = bn_states_;
  return s;
}

void ParamStore::restore(const Snapshot& snap) {
  require(snap.values.size() == entries_.size(), ErrorCode::Internal,
          "ParamStore::restore: entry count mismatch");
  for (size_t i = 0; i < entries_.size(); ++i) entries_[i].value = snap.values[i];
  bn_states_ = snap.bn_states;
}

// ---------------------------------------------------------------------------

ModelRuntime::ModelRuntime(const ModelSpec& spec, ParamStore& store)
    : spec_(&spec), store_(&store) {}

ModelRuntime::Bound ModelRuntime::bind(ad::Tape& tape, bool trainable) const {
  Bound b;
  b.param_refs.reserve(store_->entries().size());
  for (const auto& e : store_->entries()) {
    b.param_refs.push_back(tape.leaf(e.value, trainable && e.trainable));
  }
  return b;
}

ForwardResult ModelRuntime::forward(ad::Tape& tape, const Bound& bound,
                                    const ad::Tensor& batch, bool training,
                                    Rng* dropout_rng, int64_t* clamp_counter) const {
  require(batch.rank() == 4, ErrorCode::ShapeMismatch,
          "forward: batch must be (b,1,E,T), got " + batch.shape_str());
  require(batch.dim(1) == 1 && batch.dim(2) == spec_->E && batch.dim(3) == spec_->T,
          ErrorCode::ShapeMismatch,
          "forward: batch shape " + batch.shape_str() + " does not match model input (1," +
              std::to_string(spec_->E) + "," + std::to_string(spec_->T) + ")");
  require(!training || dropout_rng != nullptr, ErrorCode::InvalidArgument,
          "forward: training mode needs a dropout stream");

  ForwardResult result;
  ad::Tape::Ref cur = tape.leaf(batch, false);
  size_t entry_i = 0;
  size_t bn_i = 0;
  auto next_ref = [&]() { return bound.param_refs[entry_i++]; };

  for (size_t idx = 0; idx < spec_->layers.size(); ++idx) {
    if (static_cast<int>(idx) == spec_->split_index) {
      result.embedding = tape.flatten2(cur);
    }
    const LayerDesc& l = spec_->layers[idx];
    switch (l.kind) {
      case LayerKind::Conv2d: {
        const ad::Tape::Ref w = next_ref();
        std::optional<ad::Tape::Ref> b;
        if (l.bias) b = next_ref();
        cur = tape.conv2d(cur, w, b, l.pad);
        break;
      }
      case LayerKind::DepthwiseConv2d: {
        cur = tape.depthwise_conv2d(cur, next_ref(), l.pad);
        break;
      }
      case LayerKind::BatchNorm: {
        const ad::Tape::Ref g = next_ref();
        const ad::Tape::Ref b = next_ref();
        cur = tape.batch_norm(cur, g, b, &store_->bn_states()[bn_i++], training);
        break;
      }
      case LayerKind::Square:
        cur = tape.square(cur);
        break;
      case LayerKind::LogActivation:
        cur = tape.log_clamped(cur, kLogFloor, clamp_counter);
        break;
      case LayerKind::Elu:
        cur = tape.elu(cur);
        break;
      case LayerKind::AvgPool:
        cur = tape.avg_pool_w(cur, l.kw, l.stride);
        break;
      case LayerKind::Dropout: {
        if (training) {
          ad::Tensor mask(tape.value(cur).shape());
          for (int64_t i = 0; i < mask.numel(); ++i) {
            mask[i] = dropout_rng->uniform() < l.p ? 0.0 : 1.0;
          }
          cur = tape.dropout(cur, l.p, std::move(mask));
        }
        break;
      }
      case LayerKind::Flatten:
        cur = tape.flatten2(cur);
        break;
      case LayerKind::FullyConnected: {
        const ad::Tape::Ref w = next_ref();
        const ad::Tape::Ref b = next_ref();
        cur = tape.affine(cur, w, b);
        break;
      }
    }
  }
  require(entry_i == bound.param_refs.size(), ErrorCode::Internal,
          "forward: parameter binding drift");
  result.logits = cur;
  require(result.embedding != ad::Tape::kNone, ErrorCode::Internal,
          "forward: missing embedding tap");
  return result;
}

void ModelRuntime::accumulate_grads(ad::Tape& tape, const Bound& bound) const {
  auto& entries = store_->entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    const ad::Tape::Ref r = bound.param_refs[i];
    if (!tape.has_grad(r)) continue;
    const ad::Tensor& g = tape.grad(r);
    for (int64_t k = 0; k < g.numel(); ++k) entries[i].grad[k] += g[k];
  }
}

ad::Tensor predict_logits(const ModelSpec& spec, ParamStore& store, const ad::Tensor& batch) {
  ad::Tape tape;
  ModelRuntime rt(spec, store);
  auto bound = rt.bind(tape, false);
  auto res = rt.forward(tape, bound, batch, false, nullptr, nullptr);
  return tape.value(res.logits);
}

ad::Tensor eval_embeddings(const ModelSpec& spec, ParamStore& store, const ad::Tensor& batch) {
  ad::Tape tape;
  ModelRuntime rt(spec, store);
  auto bound = rt.bind(tape, false);
  auto res = rt.forward(tape, bound, batch, false, nullptr, nullptr);
  return tape.value(res.embedding);
}

}  // namespace sdda::models
