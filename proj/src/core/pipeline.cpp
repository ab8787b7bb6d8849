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
#include "core/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "core/errors.hpp"
#include "core/fir.hpp"
#include "core/rng.hpp"

namespace sdda::pipeline {

Config PreprocOptions::to_config() const {
  Config c;
  c.set_bool("preprocess", "filter", filter);
  c.set_int("preprocess", "fir_order", fir_order);
  c.set_double("preprocess", "band_low_hz", band_low_hz);
  c.set_double("preprocess", "band_high_hz", band_high_hz);
  c.set("preprocess", "fir_window", fir_window);
  c.set_bool("preprocess", "ema", ema);
  c.set_double("preprocess", "ema_decay", ema_decay);
  c.set_bool("preprocess", "normalize", normalize);
  c.set_bool("preprocess", "align", align);
  return c;
}

PreprocOptions PreprocOptions::from_config(const Config& c) {
  PreprocOptions p;
  p.filter = c.get_bool("preprocess", "filter", p.filter);
  p.fir_order = static_cast<int>(c.get_int("preprocess", "fir_order", p.fir_order));
  p.band_low_hz = c.get_double("preprocess", "band_low_hz", p.band_low_hz);
  p.band_high_hz = c.get_double("preprocess", "band_high_hz", p.band_high_hz);
  p.fir_window = c.get("preprocess", "fir_window", p.fir_window);
  p.ema = c.get_bool("preprocess", "ema", p.ema);
  p.ema_decay = c.get_double("preprocess", "ema_decay", p.ema_decay);
  p.normalize = c.get_bool("preprocess", "normalize", p.normalize);
  p.align = c.get_bool("preprocess", "align", p.align);
  return p;
}

data::TrialSet preprocess_domain(const data::TrialSet& in, const PreprocOptions& opt,
                                 PreprocDiag* diag) {
  data::TrialSet out = in;
  if (opt.filter) {
    const preproc::FirFilter fir =
        preproc::design_fir(opt.fir_order, opt.band_low_hz, opt.band_high_hz, in.fs,
                            opt.fir_window);
    out = preproc::filter_trials(out, fir);
  }
  if (opt.ema) {
    out = preproc::ema_standardize(out, opt.ema_decay);
  }
  if (opt.normalize) {
    int64_t zeros = 0;
    out = preproc::channel_normalize(out, &zeros);
    if (diag) diag->zero_channels += zeros;
  }
  if (opt.align) {
    const preproc::AlignmentState state = preproc::fit_alignment(out);
    if (diag) diag->floored_eigenvalues += state.floored_eigenvalues;
    out = preproc::apply_alignment(out, state);
  }
  return out;
}

TrainingResult run_training(const data::TrialSet& source_raw,
                            const data::TrialSet& target_raw, const train::TrainConfig& cfg,
                            const PreprocOptions& preproc, bool vanilla_mode,
                            const data::TrialSet* test_trace_raw) {
  cfg.validate();
  PreprocOptions effective = preproc;
  if (vanilla_mode || !cfg.use_preproc_invariants) {
    effective.normalize = false;
    effective.align = false;
  }

  TrainingResult result;
  result.model.preproc = effective;
  result.model.vanilla = vanilla_mode;

  const data::TrialSet source = preprocess_domain(source_raw, effective, &result.source_diag);
  require(source.labeled(), ErrorCode::InvalidArgument, "run_training: source is unlabeled");
  result.model.spec = cfg.arch == "convnet"
                          ? models::build_convnet(source.E, source.T, source.C)
                          : models::build_eegnet(source.E, source.T, source.C);

  data::TrialSet test_trace;
  if (test_trace_raw) test_trace = preprocess_domain(*test_trace_raw, effective, nullptr);

  train::TrainOutput out = [&] {
    if (vanilla_mode) {
      return train::train_vanilla(source, result.model.spec, cfg,
                                  test_trace_raw ? &test_trace : nullptr);
    }
    const data::TrialSet target =
        preprocess_domain(target_raw, effective, &result.target_diag);
    return train::train_siamese(source, target, result.model.spec, cfg,
                                test_trace_raw ? &test_trace : nullptr);
  }();
  result.model.params = std::move(out.params);
  result.record = std::move(out.record);
  return result;
}

metrics::EvalReport evaluate_trained(const TrainedModel& model,
                                     const data::TrialSet& labeled_raw) {
  const data::TrialSet prepared = preprocess_domain(labeled_raw, model.preproc, nullptr);
  // evaluate() takes the store non-const only to bind parameters; cast away
  // the const on a local copy to keep the public surface simple.
  models::ParamStore store = model.params;
  return metrics::evaluate(model.spec, store, prepared);
}

std::string export_embeddings_csv(const TrainedModel& model, const data::TrialSet& raw,
                                  const std::string& domain_tag) {
  const data::TrialSet set = preprocess_domain(raw, model.preproc, nullptr);
  require(set.E == model.spec.E && set.T == model.spec.T, ErrorCode::ShapeMismatch,
          "export_embeddings: set shape does not match the model");
  models::ParamStore store = model.params;
  std::ostringstream out;
  out << "index,domain,label";
  for (int k = 0; k < model.spec.embedding_dim; ++k) out << ",e" << k;
  out << "\n";
  const int batch_size = 16;
  for (int start = 0; start < set.n; start += batch_size) {
    const int b = std::min(batch_size, set.n - start);
    ad::Tensor batch({b, 1, set.E, set.T});
    std::copy(set.trial(start),
              set.trial(start) + static_cast<int64_t>(b) * set.E * set.T, batch.data());
    const ad::Tensor emb = models::eval_embeddings(model.spec, store, batch);
    for (int i = 0; i < b; ++i) {
      out << (start + i) << "," << domain_tag << ",";
      if (set.labeled()) out << set.labels[static_cast<size_t>(start + i)];
      for (int k = 0; k < model.spec.embedding_dim; ++k) {
        out << "," << Config::format_double(emb[static_cast<int64_t>(i) * model.spec.embedding_dim + k]);
      }
      out << "\n";
    }
  }
  return out.str();
}

namespace {
constexpr char kCheckpointMagic[] = "SDDA-CHECKPOINT v1";

std::string shape_token(const std::vector<int>& shape) {
  std::string s;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

std::vector<int> parse_shape_token(const std::string& tok) {
  if (tok == "scalar") return {};
  std::vector<int> shape;
  std::stringstream ss(tok);
  std::string piece;
  while (std::getline(ss, piece, 'x')) shape.push_back(std::stoi(piece));
  return shape;
}

std::map<std::string, std::string> parse_kv_line(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    const size_t eq = tok.find('=');
    require(eq != std::string::npos, ErrorCode::InvalidArgument,
            "checkpoint: bad token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}
}  // namespace

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  Config header;
  header.set("model", "arch", model.spec.arch);
  header.set_int("model", "channels", model.spec.E);
  header.set_int("model", "samples", model.spec.T);
  header.set_int("model", "classes", model.spec.C);
  header.set_bool("model", "vanilla", model.vanilla);
  header.merge_from(model.preproc.to_config());

  std::vector<double> payload;
  int index = 0;
  for (const auto& e : model.params.entries()) {
    header.set("params", "param_" + std::to_string(index++),
               "name=" + e.name + " trainable=" + (e.trainable ? "1" : "0") +
                   " fe=" + (e.feature_extractor ? "1" : "0") +
                   " shape=" + shape_token(e.value.shape()));
    payload.insert(payload.end(), e.value.vec().begin(), e.value.vec().end());
  }
  header.set_int("params", "count", index);
  index = 0;
  for (const auto& st : model.params.bn_states()) {
    header.set("buffers", "buffer_" + std::to_string(index++),
               "kind=batch_norm maps=" + std::to_string(st.running_mean.dim(0)));
    payload.insert(payload.end(), st.running_mean.vec().begin(), st.running_mean.vec().end());
    payload.insert(payload.end(), st.running_var.vec().begin(), st.running_var.vec().end());
  }
  header.set_int("buffers", "count", index);

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write checkpoint: " + path);
  out << kCheckpointMagic << "\n" << header.serialize() << "DATA\n";
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  require(out.good(), ErrorCode::Io, "short write on checkpoint: " + path);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string magic_line = std::string(kCheckpointMagic) + "\n";
  require(bytes.rfind(magic_line, 0) == 0, ErrorCode::BadMagic,
          "bad magic: not a checkpoint file: " + path);
  const std::string sentinel = "\nDATA\n";
  const size_t split = bytes.find(sentinel);
  require(split != std::string::npos, ErrorCode::Truncated,
          "checkpoint missing DATA sentinel: " + path);
  const Config header = Config::parse(bytes.substr(magic_line.size(), split - magic_line.size()));
  const char* data = bytes.data() + split + sentinel.size();
  size_t data_bytes = bytes.size() - split - sentinel.size();

  TrainedModel model;
  const std::string arch = header.require_get("model", "arch");
  const int E = static_cast<int>(header.get_int("model", "channels", 0));
  const int T = static_cast<int>(header.get_int("model", "samples", 0));
  const int C = static_cast<int>(header.get_int("model", "classes", 0));
  model.spec = arch == "convnet" ? models::build_convnet(E, T, C) : models::build_eegnet(E, T, C);
  model.vanilla = header.get_bool("model", "vanilla", false);
  model.preproc = PreprocOptions::from_config(header);

  // Rebuild the store structurally, then overwrite every buffer from DATA.
  Rng rng(0);
  model.params = models::ParamStore::init(model.spec, rng);
  auto take = [&](ad::Tensor& t) {
    const size_t want = static_cast<size_t>(t.numel()) * sizeof(double);
    require(data_bytes >= want, ErrorCode::Truncated,
            "checkpoint payload truncated: " + path);
    std::memcpy(t.data(), data, want);
    data += want;
    data_bytes -= want;
  };
  const int param_count = static_cast<int>(header.get_int("params", "count", -1));
  require(param_count == static_cast<int>(model.params.entries().size()),
          ErrorCode::InvalidArgument,
          "checkpoint parameter count does not match the rebuilt model: " + path);
  for (int i = 0; i < param_count; ++i) {
    auto kv = parse_kv_line(header.require_get("params", "param_" + std::to_string(i)));
    auto& entry = model.params.entries()[static_cast<size_t>(i)];
    require(kv["name"] == entry.name, ErrorCode::InvalidArgument,
            "checkpoint parameter order mismatch: expected " + entry.name + ", got " +
                kv["name"]);
    require(parse_shape_token(kv["shape"]) == entry.value.shape(), ErrorCode::ShapeMismatch,
            "checkpoint shape mismatch for " + entry.name);
    take(entry.value);
  }
  const int buffer_count = static_cast<int>(header.get_int("buffers", "count", -1));
  require(buffer_count == static_cast<int>(model.params.bn_states().size()),
          ErrorCode::InvalidArgument, "checkpoint buffer count mismatch: " + path);
  for (auto& st : model.params.bn_states()) {
    take(st.running_mean);
    take(st.running_var);
  }
  require(data_bytes == 0, ErrorCode::InvalidArgument,
          "trailing bytes after checkpoint payload: " + path);
  return model;
}

std::string GridResult::to_csv() const {
  std::ostringstream out;
  out << "lambda1\\lambda2";
  for (double l2 : lambda2_values) out << "," << Config::format_double(l2);
  out << "\n";
  for (size_t i = 0; i < lambda1_values.size(); ++i) {
    out << Config::format_double(lambda1_values[i]);
    for (size_t j = 0; j < lambda2_values.size(); ++j) {
      out << ",";
      if (!std::isnan(mean_accuracy[i][j])) out << Config::format_double(mean_accuracy[i][j]);
    }
    out << "\n";
  }
  return out.str();
}

GridResult grid_search(const data::TrialSet& source_raw, const data::TrialSet& target_raw,
                       const train::TrainConfig& base_cfg, const PreprocOptions& preproc) {
  base_cfg.validate();
  require(target_raw.labeled(), ErrorCode::InvalidArgument,
          "grid_search: the target session must be labeled for evaluation");
  GridResult grid;
  grid.lambda1_values = base_cfg.lambda1_grid;
  grid.lambda2_values = base_cfg.lambda2_grid;
  grid.mean_accuracy.assign(grid.lambda1_values.size(),
                            std::vector<double>(grid.lambda2_values.size(),
                                                std::numeric_limits<double>::quiet_NaN()));
  for (size_t i = 0; i < grid.lambda1_values.size(); ++i) {
    for (size_t j = 0; j < grid.lambda2_values.size(); ++j) {
      double sum = 0;
      bool failed = false;
      for (int rep = 0; rep < base_cfg.repetitions && !failed; ++rep) {
        train::TrainConfig cfg = base_cfg;
        cfg.lambda1 = grid.lambda1_values[i];
        cfg.lambda2 = grid.lambda2_values[j];
        // Repetition seeds are shared across cells so the grid compares the
        // trade-offs on paired runs.
        cfg.seed = derive_seed(base_cfg.seed, "grid/rep/" + std::to_string(rep));
        TrainingResult run = run_training(source_raw, target_raw, cfg, preproc);
        if (run.record.diverged) {
          failed = true;
          break;
        }
        sum += evaluate_trained(run.model, target_raw).accuracy;
      }
      if (!failed) grid.mean_accuracy[i][j] = sum / base_cfg.repetitions;
    }
  }
  const auto [bi, bj] = grid_argmax(grid.mean_accuracy);
  grid.best_lambda1 = grid.lambda1_values[bi];
  grid.best_lambda2 = grid.lambda2_values[bj];
  return grid;
}

std::pair<size_t, size_t> grid_argmax(const std::vector<std::vector<double>>& mean_accuracy) {
  // Ties prefer smaller lambda2 (column), then smaller lambda1 (row); failed
  // cells record NaN and never win.
  double best = -1;
  size_t bi = 0, bj = 0;
  bool any = false;
  for (size_t j = 0; !mean_accuracy.empty() && j < mean_accuracy[0].size(); ++j) {
    for (size_t i = 0; i < mean_accuracy.size(); ++i) {
      const double v = mean_accuracy[i][j];
      if (std::isnan(v)) continue;
      if (!any || v > best) {
        best = v;
        bi = i;
        bj = j;
        any = true;
      }
    }
  }
  require(any, ErrorCode::Diverged, "grid_search: every cell failed");
  return {bi, bj};
}

}  // namespace sdda::pipeline
