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
#include "sdda/sdda.h"

#include <cstring>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/digest.hpp"
#include "core/errors.hpp"
#include "core/metrics.hpp"
#include "core/models.hpp"
#include "core/pipeline.hpp"
#include "core/synth.hpp"
#include "core/train.hpp"
#include "core/trialset.hpp"

using sdda::Config;
using sdda::Error;
using sdda::ErrorCode;

struct sdda_trialset {
  sdda::data::TrialSet set;
};

struct sdda_model {
  sdda::pipeline::TrainedModel model;
};

namespace {

thread_local std::string g_last_error;

sdda_status code_to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return SDDA_ERR_INVALID_ARGUMENT;
    case ErrorCode::ShapeMismatch: return SDDA_ERR_SHAPE_MISMATCH;
    case ErrorCode::Io: return SDDA_ERR_IO;
    case ErrorCode::BadMagic: return SDDA_ERR_BAD_MAGIC;
    case ErrorCode::Truncated: return SDDA_ERR_TRUNCATED;
    case ErrorCode::LabelRange: return SDDA_ERR_LABEL_RANGE;
    case ErrorCode::BadConfig: return SDDA_ERR_BAD_CONFIG;
    case ErrorCode::Diverged: return SDDA_ERR_DIVERGED;
    case ErrorCode::UnknownSession: return SDDA_ERR_UNKNOWN_SESSION;
    case ErrorCode::NonFinite: return SDDA_ERR_NON_FINITE;
    case ErrorCode::Internal: return SDDA_ERR_INTERNAL;
  }
  return SDDA_ERR_INTERNAL;
}

template <typename Fn>
sdda_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SDDA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return code_to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SDDA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SDDA_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** slot, const std::string& s) {
  if (slot) *slot = dup_string(s);
}

Config parse_config_text(const char* text) {
  return Config::parse(text ? std::string(text) : std::string());
}

void check_ptr(const void* p, const char* what) {
  sdda::require(p != nullptr, ErrorCode::InvalidArgument,
                std::string(what) + " must not be null");
}

}  // namespace

extern "C" {

const char* sdda_version(void) { return "0.1.0"; }

const char* sdda_status_name(sdda_status status) {
  switch (status) {
    case SDDA_OK: return "ok";
    case SDDA_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SDDA_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case SDDA_ERR_IO: return "io_error";
    case SDDA_ERR_BAD_MAGIC: return "bad_magic";
    case SDDA_ERR_TRUNCATED: return "truncated_payload";
    case SDDA_ERR_LABEL_RANGE: return "label_out_of_range";
    case SDDA_ERR_BAD_CONFIG: return "bad_config";
    case SDDA_ERR_DIVERGED: return "diverged";
    case SDDA_ERR_UNKNOWN_SESSION: return "unknown_session";
    case SDDA_ERR_NON_FINITE: return "non_finite";
    case SDDA_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* sdda_last_error(void) { return g_last_error.c_str(); }

void sdda_string_free(char* s) { delete[] s; }

/* ---- trial sets ------------------------------------------------------- */

sdda_status sdda_trialset_read(const char* path, sdda_trialset** out) {
  return guarded([&] {
    check_ptr(path, "path");
    check_ptr(out, "out");
    *out = new sdda_trialset{sdda::data::read_container(path)};
  });
}

sdda_status sdda_trialset_write(const sdda_trialset* set, const char* path) {
  return guarded([&] {
    check_ptr(set, "set");
    check_ptr(path, "path");
    sdda::data::write_container(set->set, path);
  });
}

sdda_status sdda_trialset_import_csv(const char* directory, double fs, sdda_trialset** out) {
  return guarded([&] {
    check_ptr(directory, "directory");
    check_ptr(out, "out");
    *out = new sdda_trialset{sdda::data::import_csv(directory, fs)};
  });
}

void sdda_trialset_free(sdda_trialset* set) { delete set; }

sdda_status sdda_trialset_info(const sdda_trialset* set, uint32_t* n, uint32_t* channels,
                               uint32_t* samples, double* fs, uint32_t* classes,
                               int* has_labels) {
  return guarded([&] {
    check_ptr(set, "set");
    if (n) *n = static_cast<uint32_t>(set->set.n);
    if (channels) *channels = static_cast<uint32_t>(set->set.E);
    if (samples) *samples = static_cast<uint32_t>(set->set.T);
    if (fs) *fs = set->set.fs;
    if (classes) *classes = static_cast<uint32_t>(set->set.C);
    if (has_labels) *has_labels = set->set.labeled() ? 1 : 0;
  });
}

sdda_status sdda_trialset_labels(const sdda_trialset* set, int32_t* labels) {
  return guarded([&] {
    check_ptr(set, "set");
    check_ptr(labels, "labels");
    for (int i = 0; i < set->set.n; ++i) {
      labels[i] = set->set.labeled() ? set->set.labels[static_cast<size_t>(i)] : -1;
    }
  });
}

sdda_status sdda_trialset_split_sessions(const sdda_trialset* set, const char* policy,
                                         sdda_trialset** source, sdda_trialset** target) {
  return guarded([&] {
    check_ptr(set, "set");
    check_ptr(policy, "policy");
    check_ptr(source, "source");
    check_ptr(target, "target");
    auto [s, t] = sdda::data::split_sessions(set->set, policy);
    *source = new sdda_trialset{std::move(s)};
    *target = new sdda_trialset{std::move(t)};
  });
}

sdda_status sdda_trialset_provenance(const sdda_trialset* set, int* has_participant,
                                     uint32_t* participant) {
  return guarded([&] {
    check_ptr(set, "set");
    if (has_participant) *has_participant = set->set.has_participant ? 1 : 0;
    if (participant) *participant = set->set.participant;
  });
}

sdda_status sdda_synth_generate(const char* config_text, sdda_trialset** source,
                                sdda_trialset** target, char** resolved_config) {
  return guarded([&] {
    check_ptr(source, "source");
    check_ptr(target, "target");
    const auto cfg = sdda::data::SynthConfig::from_config(parse_config_text(config_text));
    auto [s, t] = sdda::data::generate_synthetic(cfg);
    *source = new sdda_trialset{std::move(s)};
    *target = new sdda_trialset{std::move(t)};
    set_out(resolved_config, cfg.to_config().serialize());
  });
}

sdda_status sdda_preprocess(const sdda_trialset* in, const char* config_text,
                            sdda_trialset** out, char** diagnostics,
                            char** resolved_config) {
  return guarded([&] {
    check_ptr(in, "in");
    check_ptr(out, "out");
    const auto opt = sdda::pipeline::PreprocOptions::from_config(parse_config_text(config_text));
    sdda::pipeline::PreprocDiag diag;
    *out = new sdda_trialset{sdda::pipeline::preprocess_domain(in->set, opt, &diag)};
    Config d;
    d.set_int("diagnostics", "zero_channels", diag.zero_channels);
    d.set_int("diagnostics", "floored_eigenvalues", diag.floored_eigenvalues);
    set_out(diagnostics, d.serialize());
    set_out(resolved_config, opt.to_config().serialize());
  });
}

/* ---- models ----------------------------------------------------------- */

sdda_status sdda_model_build(const char* arch, uint32_t channels, uint32_t samples,
                             uint32_t classes, sdda_model** out) {
  return guarded([&] {
    check_ptr(arch, "arch");
    check_ptr(out, "out");
    const std::string a(arch);
    sdda::require(a == "eegnet" || a == "convnet", ErrorCode::InvalidArgument,
                  "unknown architecture '" + a + "' (expected eegnet or convnet)");
    sdda::pipeline::TrainedModel m;
    m.spec = a == "convnet"
                 ? sdda::models::build_convnet(static_cast<int>(channels),
                                               static_cast<int>(samples),
                                               static_cast<int>(classes))
                 : sdda::models::build_eegnet(static_cast<int>(channels),
                                              static_cast<int>(samples),
                                              static_cast<int>(classes));
    sdda::Rng rng(0);
    m.params = sdda::models::ParamStore::init(m.spec, rng);
    *out = new sdda_model{std::move(m)};
  });
}

void sdda_model_free(sdda_model* model) { delete model; }

sdda_status sdda_model_param_report(const sdda_model* model, char** csv) {
  return guarded([&] {
    check_ptr(model, "model");
    check_ptr(csv, "csv");
    set_out(csv, sdda::models::count_params(model->model.spec).to_csv());
  });
}

sdda_status sdda_model_total_params(const sdda_model* model, uint64_t* total) {
  return guarded([&] {
    check_ptr(model, "model");
    check_ptr(total, "total");
    *total = static_cast<uint64_t>(sdda::models::count_params(model->model.spec).total);
  });
}

sdda_status sdda_model_spec_text(const sdda_model* model, char** text) {
  return guarded([&] {
    check_ptr(model, "model");
    check_ptr(text, "text");
    set_out(text, sdda::models::spec_to_text(model->model.spec));
  });
}

sdda_status sdda_model_save(const sdda_model* model, const char* path) {
  return guarded([&] {
    check_ptr(model, "model");
    check_ptr(path, "path");
    sdda::pipeline::save_checkpoint(model->model, path);
  });
}

sdda_status sdda_model_load(const char* path, sdda_model** out) {
  return guarded([&] {
    check_ptr(path, "path");
    check_ptr(out, "out");
    *out = new sdda_model{sdda::pipeline::load_checkpoint(path)};
  });
}

/* ---- training and evaluation ------------------------------------------ */

sdda_status sdda_train(const sdda_trialset* source, const sdda_trialset* target,
                       const char* config_text, int vanilla, sdda_model** model,
                       char** record_text, char** trace_csv, char** resolved_config,
                       int* diverged) {
  return guarded([&] {
    check_ptr(source, "source");
    check_ptr(model, "model");
    const Config raw = parse_config_text(config_text);
    const auto cfg = sdda::train::TrainConfig::from_config(raw);
    const auto preproc = sdda::pipeline::PreprocOptions::from_config(raw);
    if (!vanilla) check_ptr(target, "target");
    static const sdda::data::TrialSet kEmpty{};
    sdda::pipeline::TrainingResult result = sdda::pipeline::run_training(
        source->set, target ? target->set : kEmpty, cfg, preproc, vanilla != 0);
    set_out(record_text, result.record.to_text());
    set_out(trace_csv, result.record.trace_csv());
    Config resolved = cfg.to_config();
    resolved.merge_from(preproc.to_config());
    resolved.set_bool("train", "vanilla", vanilla != 0);
    set_out(resolved_config, resolved.serialize());
    if (diverged) *diverged = result.record.diverged ? 1 : 0;
    *model = new sdda_model{std::move(result.model)};
  });
}

sdda_status sdda_evaluate(const sdda_model* model, const sdda_trialset* labeled,
                          double* accuracy, double* kappa, char** metrics_csv,
                          char** confusion_csv) {
  return guarded([&] {
    check_ptr(model, "model");
    check_ptr(labeled, "labeled");
    const auto report = sdda::pipeline::evaluate_trained(model->model, labeled->set);
    if (accuracy) *accuracy = report.accuracy;
    if (kappa) *kappa = report.kappa;
    set_out(metrics_csv, report.to_csv());
    set_out(confusion_csv, report.confusion_csv());
  });
}

sdda_status sdda_export_embeddings(const sdda_model* model, const sdda_trialset* set,
                                   const char* domain_tag, char** csv) {
  return guarded([&] {
    check_ptr(model, "model");
    check_ptr(set, "set");
    check_ptr(csv, "csv");
    set_out(csv, sdda::pipeline::export_embeddings_csv(
                     model->model, set->set, domain_tag ? domain_tag : "unknown"));
  });
}

sdda_status sdda_grid_search(const sdda_trialset* source, const sdda_trialset* target_labeled,
                             const char* config_text, char** grid_csv, double* best_lambda1,
                             double* best_lambda2, char** resolved_config) {
  return guarded([&] {
    check_ptr(source, "source");
    check_ptr(target_labeled, "target_labeled");
    const Config raw = parse_config_text(config_text);
    const auto cfg = sdda::train::TrainConfig::from_config(raw);
    const auto preproc = sdda::pipeline::PreprocOptions::from_config(raw);
    const auto grid =
        sdda::pipeline::grid_search(source->set, target_labeled->set, cfg, preproc);
    set_out(grid_csv, grid.to_csv());
    if (best_lambda1) *best_lambda1 = grid.best_lambda1;
    if (best_lambda2) *best_lambda2 = grid.best_lambda2;
    Config resolved = cfg.to_config();
    resolved.merge_from(preproc.to_config());
    resolved.set("train", "grid_selection", "labeled_target_accuracy");
    set_out(resolved_config, resolved.serialize());
  });
}

/* ---- metrics and utilities -------------------------------------------- */

sdda_status sdda_kappa(double accuracy, uint32_t classes, double* kappa) {
  return guarded([&] {
    check_ptr(kappa, "kappa");
    *kappa = sdda::metrics::kappa(accuracy, static_cast<int>(classes));
  });
}

sdda_status sdda_file_digest(const char* path, char** hex) {
  return guarded([&] {
    check_ptr(path, "path");
    check_ptr(hex, "hex");
    set_out(hex, sdda::file_digest(path));
  });
}

sdda_status sdda_report_tables(const char* rows_csv, uint32_t classes, char** table_csv,
                               char** table_text) {
  return guarded([&] {
    check_ptr(rows_csv, "rows_csv");
    std::vector<sdda::metrics::ReportRow> rows;
    std::istringstream in(rows_csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      std::stringstream ss(line);
      std::string method, participant, acc;
      sdda::require(std::getline(ss, method, ',') && std::getline(ss, participant, ',') &&
                        std::getline(ss, acc, ','),
                    ErrorCode::InvalidArgument,
                    "report rows must be 'method,participant,accuracy[,...]', got: " + line);
      sdda::metrics::ReportRow row;
      row.method = method;
      row.participant = participant;
      row.accuracy = std::stod(acc);
      rows.push_back(std::move(row));
    }
    sdda::require(!rows.empty(), ErrorCode::InvalidArgument, "no report rows");
    const auto table =
        sdda::metrics::ReportTable::aggregate(rows, static_cast<int>(classes));
    set_out(table_csv, table.to_csv());
    set_out(table_text, table.to_text());
  });
}

} /* extern "C" */
