/*
 * Copyright 2026 The mdunet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MDUNET_MDUNET_H_
#define MDUNET_MDUNET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MDU_API __declspec(dllexport)
#elif defined(__GNUC__)
#define MDU_API __attribute__((visibility("default")))
#else
#define MDU_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mdu_status {
  MDU_OK = 0,
  MDU_ERR_INTERNAL = 1,
  MDU_ERR_CONFIG = 2,
  MDU_ERR_DATA = 3,
  MDU_ERR_DIVERGENCE = 4,
  MDU_ERR_SHAPE = 5,
  MDU_ERR_VALUE = 6,
  MDU_ERR_ARGUMENT = 7
} mdu_status;

typedef struct mdu_config mdu_config;
typedef struct mdu_model mdu_model;

/* Called with one human-readable line per training epoch. */
typedef void (*mdu_progress_fn)(const char* line, void* user);

MDU_API const char* mdu_version(void);

/* Message of the last failed call on this thread; "" after a success. */
MDU_API const char* mdu_last_error(void);

/* Frees strings returned through char** out-parameters. */
MDU_API void mdu_string_free(char* s);

/* ---- run configuration (JSON) ---- */

MDU_API mdu_status mdu_config_default(mdu_config** out);
MDU_API mdu_status mdu_config_parse(const char* json_text, mdu_config** out);
MDU_API mdu_status mdu_config_load(const char* path, mdu_config** out);
/* Applies a JSON merge patch and revalidates; the config is unchanged on error. */
MDU_API mdu_status mdu_config_patch(mdu_config* cfg, const char* json_patch);
/* Replaces the seed with MDU_SEED when that variable is set. */
MDU_API mdu_status mdu_config_apply_env(mdu_config* cfg);
MDU_API mdu_status mdu_config_to_json(const mdu_config* cfg, char** out);
MDU_API uint64_t mdu_config_seed(const mdu_config* cfg);
MDU_API void mdu_config_free(mdu_config* cfg);

/* ---- models ---- */

MDU_API mdu_status mdu_model_create(const mdu_config* cfg, mdu_model** out);
MDU_API mdu_status mdu_model_load(const char* checkpoint_path, mdu_model** out);
MDU_API mdu_status mdu_model_save(const mdu_model* model, const char* checkpoint_path);
MDU_API size_t mdu_model_parameter_count(const mdu_model* model);
MDU_API size_t mdu_model_num_modalities(const mdu_model* model);
/* Inference on one slice batch. `inputs` holds num_modalities planes of
 * batch×height×width floats in [0, 1], modality-major. `mask_out` receives
 * batch×height×width argmax labels. */
MDU_API mdu_status mdu_model_predict(mdu_model* model, const float* inputs, size_t batch,
                                     uint8_t* mask_out);
MDU_API void mdu_model_free(mdu_model* model);

/* ---- commands ---- */

/* Shape table (text or CSV), connectivity list and parameter count. */
MDU_API mdu_status mdu_inspect(const mdu_config* cfg, char** table_text, char** table_csv,
                               char** connectivity, uint64_t* parameter_count);

/* Trains per the config. Empty or NULL paths fall back to the config's
 * data and out entries. Writes checkpoint.mdp, log.csv, timing.csv and
 * manifest.json into the output directory. */
MDU_API mdu_status mdu_train(const mdu_config* cfg, const char* data_dir, const char* val_dir,
                             const char* out_dir, mdu_progress_fn progress, void* user);

/* Per-case metrics CSV and the mean ± std summary; also written to out_dir
 * (metrics.csv, summary.txt) when it is non-empty. */
MDU_API mdu_status mdu_eval(const char* checkpoint_path, const char* data_dir,
                            const char* out_dir, char** metrics_csv, char** summary);

MDU_API mdu_status mdu_predict(const char* checkpoint_path, const char* data_dir,
                               const char* out_dir, int write_pgm, size_t* cases_done);

/* Space-separated list of op names accepted by mdu_gradcheck_op. */
MDU_API mdu_status mdu_gradcheck_ops(char** names);
/* *passed is 1 when the maximum relative error is within the threshold. */
MDU_API mdu_status mdu_gradcheck_op(const char* op, uint64_t seed, size_t instances,
                                    double* max_rel_error, int* passed, char** report);
MDU_API mdu_status mdu_gradcheck_network_small(uint64_t seed, double* max_rel_error,
                                               int* passed, char** report);

typedef struct mdu_synth_options {
  uint64_t seed;
  size_t num_cases;
  size_t val_cases; /* > 0 writes train/ and val/ subdirectories */
  size_t height;
  size_t width;
  size_t depth; /* 0 draws 2 or 4 slices per case */
  size_t num_modalities;
  int conjunctive;
} mdu_synth_options;

MDU_API void mdu_synth_defaults(mdu_synth_options* opt);
MDU_API mdu_status mdu_synth(const char* out_dir, const mdu_synth_options* opt);

/* Metrics of one D×H×W mask pair with per-axis spacing {z, y, x} in mm.
 * *mhd_defined and *vs_defined are 0 when the metric is undefined. */
MDU_API mdu_status mdu_metrics(const uint8_t* reference, const uint8_t* segmentation,
                               size_t depth, size_t height, size_t width,
                               const double spacing[3], double* dsc, double* mhd_mm,
                               int* mhd_defined, double* vs, int* vs_defined);

#ifdef __cplusplus
}
#endif

#endif /* MDUNET_MDUNET_H_ */
