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
#include "core/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/optimizer.hpp"
#include "core/rng.hpp"

namespace sdda::train {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string format_g(double v) { return Config::format_double(v); }

void append_doubles(Config& c, const std::string& key, const std::vector<double>& vals) {
  std::string s;
  for (size_t i = 0; i < vals.size(); ++i) {
    if (i) s += " ";
    s += format_g(vals[i]);
  }
  c.set("train", key, s);
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  double v;
  while (in >> v) out.push_back(v);
  return out;
}

ad::Tensor make_batch(const data::TrialSet& set, const std::vector<int>& order,
                      size_t start, int b) {
  ad::Tensor batch({b, 1, set.E, set.T});
  const int64_t stride = static_cast<int64_t>(set.E) * set.T;
  for (int i = 0; i < b; ++i) {
    const double* src = set.trial(order[start + static_cast<size_t>(i)]);
    std::copy(src, src + stride, batch.data() + i * stride);
  }
  return batch;
}

std::vector<int> batch_labels(const data::TrialSet& set, const std::vector<int>& order,
                              size_t start, int b) {
  std::vector<int> y(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    y[static_cast<size_t>(i)] = set.labels[static_cast<size_t>(order[start + static_cast<size_t>(i)])];
  }
  return y;
}

void check_source(const data::TrialSet& source, const models::ModelSpec& spec) {
  source.validate();
  require(source.labeled(), ErrorCode::InvalidArgument, "train: source set is unlabeled");
  require(source.E == spec.E && source.T == spec.T, ErrorCode::ShapeMismatch,
          "train: source trials are " + std::to_string(source.E) + "x" +
              std::to_string(source.T) + " but the model expects " +
              std::to_string(spec.E) + "x" + std::to_string(spec.T));
  require(source.C == spec.C, ErrorCode::ShapeMismatch,
          "train: source has " + std::to_string(source.C) + " classes, model has " +
              std::to_string(spec.C));
  std::vector<int> counts(static_cast<size_t>(spec.C), 0);
  for (int16_t l : source.labels) ++counts[static_cast<size_t>(l)];
  for (int c = 0; c < spec.C; ++c) {
    require(counts[static_cast<size_t>(c)] > 0, ErrorCode::InvalidArgument,
            "train: class " + std::to_string(c) + " missing from source");
  }
}

struct EpochStats {
  double total = 0, softmax = 0, center = 0, mmd = 0;
};

struct StageContext {
  const models::ModelSpec& spec;
  models::ParamStore& params;
  const models::ModelRuntime& runtime;
  AdamW& opt;
  const TrainConfig& cfg;
  const data::TrialSet& source;
  const data::TrialSet* target;             // null in the vanilla loop
  losses::CenterBank* bank;                 // null when the center loss is off
  Rng& batch_rng;
  Rng& dropout_src;
  Rng& dropout_tgt;
  Rng& target_rng;
  Rng& centers_rng;
  int64_t* clamp_events;
};

// One pass over `pool` in shuffled batches; throws on non-finite losses.
EpochStats run_epoch(StageContext& ctx, const std::vector<int>& pool) {
  const TrainConfig& cfg = ctx.cfg;
  const double l1 = cfg.effective_lambda1();
  const double l2 = cfg.effective_lambda2();
  std::vector<int> order = pool;
  ctx.batch_rng.shuffle(order);
  const int b = std::min<int>(cfg.batch_size, static_cast<int>(order.size()));
  require(b >= 2, ErrorCode::InvalidArgument,
          "train: need at least 2 trials per batch, have " + std::to_string(order.size()));
  const size_t steps = order.size() / static_cast<size_t>(b);

  std::vector<double> fixed_bw;
  if (cfg.mmd_bandwidth != "median") {
    const double s2 = std::stod(cfg.mmd_bandwidth);
    require(s2 > 0, ErrorCode::BadConfig, "train: fixed mmd bandwidth must be positive");
    fixed_bw = {s2};
  }

  EpochStats sums;
  for (size_t s = 0; s < steps; ++s) {
    ad::Tensor xb = make_batch(ctx.source, order, s * static_cast<size_t>(b), b);
    const std::vector<int> yb = batch_labels(ctx.source, order, s * static_cast<size_t>(b), b);

    ctx.params.zero_grads();
    ad::Tape tape;
    const auto bound = ctx.runtime.bind(tape, true);
    const auto fwd = ctx.runtime.forward(tape, bound, xb, true, &ctx.dropout_src,
                                         ctx.clamp_events);
    const auto ls = losses::softmax_loss(tape, fwd.logits, yb);

    std::optional<ad::Tape::Ref> lc, ld;
    ad::Tensor source_emb;
    if (l1 > 0) {
      lc = losses::cosine_center_loss(tape, fwd.embedding, yb, *ctx.bank);
      source_emb = tape.value(fwd.embedding);
    }
    if (l2 > 0) {
      // Target batches are resampled uniformly with replacement each step,
      // independent of the source batch composition.
      std::vector<int> tidx(static_cast<size_t>(b));
      std::vector<int> tpool(static_cast<size_t>(b));
      for (int i = 0; i < b; ++i) {
        tpool[static_cast<size_t>(i)] =
            static_cast<int>(ctx.target_rng.below(static_cast<uint32_t>(ctx.target->n)));
        tidx[static_cast<size_t>(i)] = i;
      }
      ad::Tensor tb = make_batch(*ctx.target, tpool, 0, b);
      const auto tgt = ctx.runtime.forward(tape, bound, tb, true, &ctx.dropout_tgt,
                                           ctx.clamp_events);
      const std::vector<double> bw =
          fixed_bw.empty()
              ? losses::median_bandwidths(tape.value(fwd.embedding),
                                          tape.value(tgt.embedding), cfg.mmd_scales)
              : fixed_bw;
      ld = losses::mmd_loss(tape, fwd.embedding, tgt.embedding, bw);
    }
    const auto total = losses::total_loss(tape, ls, lc, ld, {l1, l2});
    tape.backward(total);
    ctx.runtime.accumulate_grads(tape, bound);
    ctx.opt.step(ctx.params);
    if (l1 > 0) {
      losses::update_centers(*ctx.bank, source_emb, yb, &ctx.centers_rng);
    }
    sums.total += tape.value(total).item();
    sums.softmax += tape.value(ls).item();
    if (lc) sums.center += tape.value(*lc).item();
    if (ld) sums.mmd += tape.value(*ld).item();
  }
  const double ds = static_cast<double>(steps);
  return EpochStats{sums.total / ds, sums.softmax / ds, sums.center / ds, sums.mmd / ds};
}

struct SplitIndices {
  std::vector<int> train, val, all;
};

SplitIndices make_split(const data::TrialSet& source, const TrainConfig& cfg) {
  Rng split_rng = Rng::from_label(cfg.seed, "split");
  std::vector<int> perm = split_rng.permutation(source.n);
  int n_val = static_cast<int>(std::lround(cfg.val_fraction * source.n));
  n_val = std::max(1, std::min(n_val, source.n - 2));
  SplitIndices s;
  s.val.assign(perm.begin(), perm.begin() + n_val);
  s.train.assign(perm.begin() + n_val, perm.end());
  s.all.resize(static_cast<size_t>(source.n));
  for (int i = 0; i < source.n; ++i) s.all[static_cast<size_t>(i)] = i;
  return s;
}

// Shared two-stage driver; the Siamese and vanilla entry points differ only
// in the step context they provide.
TrainOutput run_two_stage(const models::ModelSpec& spec, const TrainConfig& cfg,
                          const data::TrialSet& source, const data::TrialSet* target,
                          bool siamese, const data::TrialSet* test_trace) {
  const auto t_begin = std::chrono::steady_clock::now();
  cfg.validate();
  check_source(source, spec);
  if (siamese) {
    require(target != nullptr && target->n >= 1, ErrorCode::InvalidArgument,
            "train: target set is empty");
    require(target->E == spec.E && target->T == spec.T, ErrorCode::ShapeMismatch,
            "train: target trials do not match the model input shape");
  }
  if (test_trace) {
    require(test_trace->labeled(), ErrorCode::InvalidArgument,
            "train: test-trace set must be labeled");
  }

  Rng init_rng = Rng::from_label(cfg.seed, "init");
  models::ParamStore params = models::ParamStore::init(spec, init_rng);
  models::ModelRuntime runtime(spec, params);
  AdamW opt(params, AdamWOptions{cfg.resolved_eta(), cfg.beta1, cfg.beta2, cfg.adam_eps,
                                 cfg.weight_decay});

  Rng batch_rng = Rng::from_label(cfg.seed, "batch");
  Rng dropout_src = Rng::from_label(cfg.seed, "dropout/source");
  Rng dropout_tgt = Rng::from_label(cfg.seed, "dropout/target");
  Rng target_rng = Rng::from_label(cfg.seed, "target");
  Rng centers_rng = Rng::from_label(cfg.seed, "centers");

  const double l1 = siamese ? cfg.effective_lambda1() : 0.0;
  std::optional<losses::CenterBank> bank;
  if (siamese && l1 > 0) {
    bank = losses::CenterBank::init(spec.C, spec.embedding_dim, cfg.center_rate, centers_rng);
  }

  RunRecord record;
  record.seed = cfg.seed;
  record.config_text = cfg.to_config().serialize();

  int64_t clamp_events = 0;
  StageContext ctx{spec,        params,      runtime,    opt,
                   cfg,         source,      target,     bank ? &*bank : nullptr,
                   batch_rng,   dropout_src, dropout_tgt, target_rng,
                   centers_rng, &clamp_events};

  const SplitIndices split = make_split(source, cfg);

  models::ParamStore::Snapshot best_params;
  AdamW::Snapshot best_opt;
  std::optional<losses::CenterBank> best_bank;
  bool have_best = false;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  int global_epoch = 0;
  // ---- stage 1: 80% of the source, early stopping on validation loss
  for (int e = 0; e < cfg.max_epochs_stage1 && !record.diverged; ++e) {
    ++global_epoch;
    EpochStats stats;
    try {
      stats = run_epoch(ctx, split.train);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::NonFinite || err.code() == ErrorCode::Diverged) {
        record.diverged = true;
        record.note = err.what();
        --global_epoch;
        break;
      }
      throw;
    }
    const EvalLoss val = eval_softmax_metrics(spec, params, source, split.val, cfg.batch_size);
    EpochTrace row{global_epoch, 1, stats.total, stats.softmax, stats.center, stats.mmd,
                   val.ce, val.accuracy, -1.0};
    if (test_trace) {
      row.test_acc =
          eval_softmax_metrics(spec, params, *test_trace, {}, cfg.batch_size).accuracy;
    }
    record.trace.push_back(row);
    record.stage1_epochs = global_epoch;
    if (global_epoch <= cfg.min_epochs_stage1) continue;
    if (val.ce < best_val) {
      best_val = val.ce;
      best_epoch = global_epoch;
      best_params = params.snapshot();
      best_opt = opt.snapshot();
      best_bank = bank;
      have_best = true;
    } else if (have_best && global_epoch - best_epoch >= cfg.patience) {
      break;
    }
  }

  // ---- stage 2: resume from the best checkpoint, 100% of the source
  record.best_val_loss = have_best ? best_val : kNan;
  record.best_epoch = best_epoch;
  if (have_best) {
    params.restore(best_params);
    opt.restore(best_opt);
    bank = best_bank;
    ctx.bank = bank ? &*bank : nullptr;
  }
  record.stage2_final_train_loss = kNan;
  for (int e = 0; e < cfg.max_epochs_stage2 && !record.diverged; ++e) {
    ++global_epoch;
    EpochStats stats;
    try {
      stats = run_epoch(ctx, split.all);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::NonFinite || err.code() == ErrorCode::Diverged) {
        record.diverged = true;
        record.note = err.what();
        --global_epoch;
        break;
      }
      throw;
    }
    const EvalLoss val = eval_softmax_metrics(spec, params, source, split.val, cfg.batch_size);
    EpochTrace row{global_epoch, 2, stats.total, stats.softmax, stats.center, stats.mmd,
                   val.ce, val.accuracy, -1.0};
    if (test_trace) {
      row.test_acc =
          eval_softmax_metrics(spec, params, *test_trace, {}, cfg.batch_size).accuracy;
    }
    record.trace.push_back(row);
    ++record.stage2_epochs;
    record.stage2_final_train_loss = stats.softmax;
    // Stage 2 ends once the training loss reaches the stage-1 validation loss.
    if (have_best && stats.softmax <= best_val) break;
  }

  record.log_clamp_events = clamp_events;
  record.final_train_acc =
      eval_softmax_metrics(spec, params, source, split.all, cfg.batch_size).accuracy;
  record.final_val_acc =
      eval_softmax_metrics(spec, params, source, split.val, cfg.batch_size).accuracy;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return TrainOutput{std::move(params), std::move(record)};
}

}  // namespace

void TrainConfig::validate() const {
  require(arch == "eegnet" || arch == "convnet", ErrorCode::BadConfig,
          "train: unknown arch '" + arch + "'");
  require(lambda1 >= 0 && lambda2 >= 0, ErrorCode::BadConfig,
          "train: trade-off weights must be nonnegative");
  require(batch_size >= 2, ErrorCode::BadConfig, "train: batch size must be >= 2");
  require(val_fraction > 0 && val_fraction < 1, ErrorCode::BadConfig,
          "train: validation fraction must be in (0,1)");
  require(max_epochs_stage1 >= 0 && max_epochs_stage2 >= 0, ErrorCode::BadConfig,
          "train: epoch limits must be nonnegative");
  require(patience >= 1, ErrorCode::BadConfig, "train: patience must be >= 1");
  require(min_epochs_stage1 >= 0, ErrorCode::BadConfig,
          "train: min_epochs_stage1 must be nonnegative");
  require(repetitions >= 1, ErrorCode::BadConfig, "train: repetitions must be >= 1");
  require(center_rate >= 0, ErrorCode::BadConfig, "train: center rate must be nonnegative");
  if (mmd_bandwidth != "median") {
    try {
      (void)std::stod(mmd_bandwidth);
    } catch (const std::exception&) {
      fail(ErrorCode::BadConfig,
           "train: mmd_bandwidth must be 'median' or a number, got '" + mmd_bandwidth + "'");
    }
  }
  require(!mmd_scales.empty(), ErrorCode::BadConfig, "train: empty mmd scale list");
  require(!lambda1_grid.empty() && !lambda2_grid.empty(), ErrorCode::BadConfig,
          "train: empty trade-off grid");
}

double TrainConfig::resolved_eta() const {
  if (eta > 0) return eta;
  return arch == "convnet" ? 1e-4 : 1e-3;
}

Config TrainConfig::to_config() const {
  Config c;
  c.set("train", "arch", arch);
  c.set_double("train", "lambda1", lambda1);
  c.set_double("train", "lambda2", lambda2);
  c.set_double("train", "eta", resolved_eta());
  c.set_int("train", "batch_size", batch_size);
  c.set_double("train", "center_rate", center_rate);
  c.set_double("train", "weight_decay", weight_decay);
  c.set_double("train", "beta1", beta1);
  c.set_double("train", "beta2", beta2);
  c.set_double("train", "adam_eps", adam_eps);
  c.set_int("train", "max_epochs_stage1", max_epochs_stage1);
  c.set_int("train", "max_epochs_stage2", max_epochs_stage2);
  c.set_int("train", "patience", patience);
  c.set_int("train", "min_epochs_stage1", min_epochs_stage1);
  c.set_double("train", "val_fraction", val_fraction);
  c.set_int("train", "seed", static_cast<int64_t>(seed));
  c.set_int("train", "repetitions", repetitions);
  c.set_bool("train", "use_preproc_invariants", use_preproc_invariants);
  c.set_bool("train", "use_center", use_center);
  c.set_bool("train", "use_mmd", use_mmd);
  c.set("train", "mmd_bandwidth", mmd_bandwidth);
  append_doubles(c, "mmd_scales", mmd_scales);
  append_doubles(c, "lambda1_grid", lambda1_grid);
  append_doubles(c, "lambda2_grid", lambda2_grid);
  // Fixed implementation choices, recorded for reproducibility.
  c.set("train", "embedding_tap", "feature_extractor_output_after_dropout");
  c.set("train", "center_update_space", "normalized");
  c.set("train", "target_alignment_fit", "full_session");
  return c;
}

TrainConfig TrainConfig::from_config(const Config& c) {
  TrainConfig t;
  t.arch = c.get("train", "arch", t.arch);
  t.lambda1 = c.get_double("train", "lambda1", t.lambda1);
  t.lambda2 = c.get_double("train", "lambda2", t.lambda2);
  t.eta = c.get_double("train", "eta", t.eta);
  t.batch_size = static_cast<int>(c.get_int("train", "batch_size", t.batch_size));
  t.center_rate = c.get_double("train", "center_rate", t.center_rate);
  t.weight_decay = c.get_double("train", "weight_decay", t.weight_decay);
  t.beta1 = c.get_double("train", "beta1", t.beta1);
  t.beta2 = c.get_double("train", "beta2", t.beta2);
  t.adam_eps = c.get_double("train", "adam_eps", t.adam_eps);
  t.max_epochs_stage1 =
      static_cast<int>(c.get_int("train", "max_epochs_stage1", t.max_epochs_stage1));
  t.max_epochs_stage2 =
      static_cast<int>(c.get_int("train", "max_epochs_stage2", t.max_epochs_stage2));
  t.patience = static_cast<int>(c.get_int("train", "patience", t.patience));
  t.min_epochs_stage1 =
      static_cast<int>(c.get_int("train", "min_epochs_stage1", t.min_epochs_stage1));
  t.val_fraction = c.get_double("train", "val_fraction", t.val_fraction);
  t.seed = static_cast<uint64_t>(c.get_int("train", "seed", static_cast<int64_t>(t.seed)));
  t.repetitions = static_cast<int>(c.get_int("train", "repetitions", t.repetitions));
  t.use_preproc_invariants =
      c.get_bool("train", "use_preproc_invariants", t.use_preproc_invariants);
  t.use_center = c.get_bool("train", "use_center", t.use_center);
  t.use_mmd = c.get_bool("train", "use_mmd", t.use_mmd);
  t.mmd_bandwidth = c.get("train", "mmd_bandwidth", t.mmd_bandwidth);
  if (c.has("train", "mmd_scales")) t.mmd_scales = parse_doubles(c.get("train", "mmd_scales", ""));
  if (c.has("train", "lambda1_grid")) {
    t.lambda1_grid = parse_doubles(c.get("train", "lambda1_grid", ""));
  }
  if (c.has("train", "lambda2_grid")) {
    t.lambda2_grid = parse_doubles(c.get("train", "lambda2_grid", ""));
  }
  return t;
}

std::string RunRecord::trace_csv() const {
  std::ostringstream out;
  out << "epoch,stage,train_total,train_softmax,train_center,train_mmd,val_loss,val_acc,test_acc\n";
  for (const auto& r : trace) {
    out << r.epoch << "," << r.stage << "," << format_g(r.train_total) << ","
        << format_g(r.train_softmax) << "," << format_g(r.train_center) << ","
        << format_g(r.train_mmd) << "," << format_g(r.val_loss) << ","
        << format_g(r.val_acc) << ",";
    if (r.test_acc >= 0) out << format_g(r.test_acc);
    out << "\n";
  }
  return out.str();
}

std::string RunRecord::to_text() const {
  Config c;
  c.set_int("record", "stage1_epochs", stage1_epochs);
  c.set_int("record", "stage2_epochs", stage2_epochs);
  c.set_double("record", "best_val_loss", best_val_loss);
  c.set_int("record", "best_epoch", best_epoch);
  c.set_double("record", "stage2_final_train_loss", stage2_final_train_loss);
  c.set_bool("record", "diverged", diverged);
  if (!note.empty()) c.set("record", "note", note);
  c.set_int("record", "log_clamp_events", log_clamp_events);
  c.set_double("record", "final_train_acc", final_train_acc);
  c.set_double("record", "final_val_acc", final_val_acc);
  c.set_int("record", "seed", static_cast<int64_t>(seed));
  c.set_double("timing", "wall_seconds", wall_seconds);
  return c.serialize() + config_text;
}

EvalLoss eval_softmax_metrics(const models::ModelSpec& spec, models::ParamStore& store,
                              const data::TrialSet& set, const std::vector<int>& indices,
                              int batch_size) {
  require(set.labeled(), ErrorCode::InvalidArgument,
          "eval_softmax_metrics: set is unlabeled");
  std::vector<int> idx = indices;
  if (idx.empty()) {
    idx.resize(static_cast<size_t>(set.n));
    for (int i = 0; i < set.n; ++i) idx[static_cast<size_t>(i)] = i;
  }
  double ce = 0;
  int64_t correct = 0;
  const int n = static_cast<int>(idx.size());
  for (int start = 0; start < n; start += batch_size) {
    const int b = std::min(batch_size, n - start);
    ad::Tensor batch = make_batch(set, idx, static_cast<size_t>(start), b);
    const ad::Tensor logits = models::predict_logits(spec, store, batch);
    for (int i = 0; i < b; ++i) {
      const double* row = logits.data() + static_cast<int64_t>(i) * spec.C;
      const int y = set.labels[static_cast<size_t>(idx[static_cast<size_t>(start + i)])];
      double m = row[0];
      int best = 0;
      for (int c = 1; c < spec.C; ++c) {
        if (row[c] > m) m = row[c];
        if (row[c] > row[best]) best = c;
      }
      double lse = 0;
      for (int c = 0; c < spec.C; ++c) lse += std::exp(row[c] - m);
      ce -= row[y] - m - std::log(lse);
      if (best == y) ++correct;
    }
  }
  EvalLoss out;
  out.ce = n > 0 ? ce / n : 0.0;
  out.accuracy = n > 0 ? static_cast<double>(correct) / n : 0.0;
  return out;
}

TrainOutput train_siamese(const data::TrialSet& source, const data::TrialSet& target,
                          const models::ModelSpec& spec, const TrainConfig& cfg,
                          const data::TrialSet* test_trace) {
  return run_two_stage(spec, cfg, source, &target, true, test_trace);
}

TrainOutput train_vanilla(const data::TrialSet& source, const models::ModelSpec& spec,
                          const TrainConfig& cfg, const data::TrialSet* test_trace) {
  return run_two_stage(spec, cfg, source, nullptr, false, test_trace);
}

}  // namespace sdda::train
