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

/*
 * C API of the sdda library: Siamese domain adaptation for cross-session
 * multichannel time-series classification.
 *
 * Conventions:
 *  - every function returns an sdda_status; SDDA_OK is 0;
 *  - on failure sdda_last_error() carries a human-readable detail message
 *    (thread local);
 *  - objects are opaque handles released with their _free function;
 *  - strings returned through char** are heap copies released with
 *    sdda_string_free;
 *  - configuration crosses the boundary as structured text
 *    ("[section]" headers and "key = value" lines).
 */
#ifndef SDDA_SDDA_H_
#define SDDA_SDDA_H_

#include <stdint.h>

#if defined(_WIN32)
#define SDDA_API __declspec(dllexport)
#else
#define SDDA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sdda_status {
  SDDA_OK = 0,
  SDDA_ERR_INVALID_ARGUMENT = 1,
  SDDA_ERR_SHAPE_MISMATCH = 2,
  SDDA_ERR_IO = 3,
  SDDA_ERR_BAD_MAGIC = 4,
  SDDA_ERR_TRUNCATED = 5,
  SDDA_ERR_LABEL_RANGE = 6,
  SDDA_ERR_BAD_CONFIG = 7,
  SDDA_ERR_DIVERGED = 8,
  SDDA_ERR_UNKNOWN_SESSION = 9,
  SDDA_ERR_NON_FINITE = 10,
  SDDA_ERR_INTERNAL = 11
} sdda_status;

typedef struct sdda_trialset sdda_trialset;
typedef struct sdda_model sdda_model;

SDDA_API const char* sdda_version(void);
SDDA_API const char* sdda_status_name(sdda_status status);
SDDA_API const char* sdda_last_error(void);
SDDA_API void sdda_string_free(char* s);

/* ---- trial sets ------------------------------------------------------- */

SDDA_API sdda_status sdda_trialset_read(const char* path, sdda_trialset** out);
SDDA_API sdda_status sdda_trialset_write(const sdda_trialset* set, const char* path);
SDDA_API sdda_status sdda_trialset_import_csv(const char* directory, double fs,
                                              sdda_trialset** out);
SDDA_API void sdda_trialset_free(sdda_trialset* set);

SDDA_API sdda_status sdda_trialset_info(const sdda_trialset* set, uint32_t* n,
                                        uint32_t* channels, uint32_t* samples,
                                        double* fs, uint32_t* classes,
                                        int* has_labels);
/* labels buffer must hold n entries; -1 is written for unlabeled sets. */
SDDA_API sdda_status sdda_trialset_labels(const sdda_trialset* set, int32_t* labels);

/* Session split policies "iia" and "iib". */
SDDA_API sdda_status sdda_trialset_split_sessions(const sdda_trialset* set,
                                                  const char* policy,
                                                  sdda_trialset** source,
                                                  sdda_trialset** target);

SDDA_API sdda_status sdda_trialset_provenance(const sdda_trialset* set,
                                              int* has_participant,
                                              uint32_t* participant);

/* Synthetic cross-session benchmark; config text uses the [synth] section.
   resolved_config (optional) receives the fully materialized settings. */
SDDA_API sdda_status sdda_synth_generate(const char* config_text, sdda_trialset** source,
                                         sdda_trialset** target, char** resolved_config);

/* filter -> moving standardization -> channel normalization -> alignment,
   per the [preprocess] section switches; diagnostics (optional) receives a
   "key = value" tally (zero channels, floored eigenvalues). */
SDDA_API sdda_status sdda_preprocess(const sdda_trialset* in, const char* config_text,
                                     sdda_trialset** out, char** diagnostics,
                                     char** resolved_config);

/* ---- models ----------------------------------------------------------- */

SDDA_API sdda_status sdda_model_build(const char* arch, uint32_t channels,
                                      uint32_t samples, uint32_t classes,
                                      sdda_model** out);
SDDA_API void sdda_model_free(sdda_model* model);
/* CSV: layer,params,reference,delta rows plus the totals. */
SDDA_API sdda_status sdda_model_param_report(const sdda_model* model, char** csv);
SDDA_API sdda_status sdda_model_total_params(const sdda_model* model, uint64_t* total);
SDDA_API sdda_status sdda_model_spec_text(const sdda_model* model, char** text);
SDDA_API sdda_status sdda_model_save(const sdda_model* model, const char* path);
SDDA_API sdda_status sdda_model_load(const char* path, sdda_model** out);

/* ---- training and evaluation ------------------------------------------ */

/* Two-stage Siamese training per the [train] section; preprocessing is
 * applied internally per the config switches, so raw containers go in.
 * `vanilla` trains the single-branch baseline. Divergence is reported via
 * *diverged with SDDA_OK so the partial record stays available. */
SDDA_API sdda_status sdda_train(const sdda_trialset* source, const sdda_trialset* target,
                                const char* config_text, int vanilla, sdda_model** model,
                                char** record_text, char** trace_csv,
                                char** resolved_config, int* diverged);

SDDA_API sdda_status sdda_evaluate(const sdda_model* model, const sdda_trialset* labeled,
                                   double* accuracy, double* kappa, char** metrics_csv,
                                   char** confusion_csv);

SDDA_API sdda_status sdda_export_embeddings(const sdda_model* model,
                                            const sdda_trialset* set,
                                            const char* domain_tag, char** csv);

/* Trade-off grid search; grid_csv receives the lambda1 x lambda2 accuracy
 * matrix; evaluation uses the labeled target session. */
SDDA_API sdda_status sdda_grid_search(const sdda_trialset* source,
                                      const sdda_trialset* target_labeled,
                                      const char* config_text, char** grid_csv,
                                      double* best_lambda1, double* best_lambda2,
                                      char** resolved_config);

/* ---- metrics and utilities -------------------------------------------- */

SDDA_API sdda_status sdda_kappa(double accuracy, uint32_t classes, double* kappa);
SDDA_API sdda_status sdda_file_digest(const char* path, char** hex);

/* Aggregates result rows ("method,participant,accuracy" CSV with a header
 * line; extra columns are ignored) into per-participant tables: methods as
 * rows, participants as columns, grand mean accuracy (kappa) last. */
SDDA_API sdda_status sdda_report_tables(const char* rows_csv, uint32_t classes,
                                        char** table_csv, char** table_text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SDDA_SDDA_H_ */
