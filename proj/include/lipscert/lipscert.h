// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
/* C interface to the lipscert library.
 *
 * Every function returns a lipscert_status. On failure the message for the
 * calling thread is available from lipscert_last_error() until the next call.
 * Strings handed out through char** parameters are owned by the caller and
 * released with lipscert_string_free(). Handles are released with their
 * matching *_free function; passing NULL to a free function is a no-op.
 */
#ifndef LIPSCERT_LIPSCERT_H_
#define LIPSCERT_LIPSCERT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LIPSCERT_API __declspec(dllexport)
#else
#define LIPSCERT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lipscert_status {
  LIPSCERT_OK = 0,
  LIPSCERT_ERR_INVALID_ARGUMENT = 1, /* bad parameter, config or input file */
  LIPSCERT_ERR_NON_LIPSCHITZ = 2,    /* layer without a finite bound */
  LIPSCERT_ERR_NUMERIC = 3,          /* NaN/Inf or a failed numerical guard */
  LIPSCERT_ERR_IO = 4,
  LIPSCERT_ERR_INTERNAL = 5
} lipscert_status;

typedef enum lipscert_verdict {
  LIPSCERT_CONVERGED = 0,
  LIPSCERT_NOT_CONVERGED = 1,
  LIPSCERT_DIVERGED = 2
} lipscert_verdict;

/* Norm selection for certification; combine with bitwise or. */
enum { LIPSCERT_NORM_2 = 1, LIPSCERT_NORM_INF = 2 };

typedef struct lipscert_config lipscert_config;
typedef struct lipscert_model lipscert_model;
typedef struct lipscert_cert_report lipscert_cert_report;
typedef struct lipscert_train_result lipscert_train_result;

LIPSCERT_API const char* lipscert_version(void);
LIPSCERT_API const char* lipscert_last_error(void);
LIPSCERT_API const char* lipscert_status_name(lipscert_status s);
LIPSCERT_API void lipscert_string_free(char* s);

/* ---- configuration ---- */

LIPSCERT_API lipscert_status lipscert_config_default(lipscert_config** out);
LIPSCERT_API lipscert_status lipscert_config_parse(const char* json, lipscert_config** out);
LIPSCERT_API lipscert_status lipscert_config_load(const char* path, lipscert_config** out);
LIPSCERT_API void lipscert_config_free(lipscert_config* cfg);
/* Replaces one field. key is a dotted path such as "train.lr" or "alpha";
 * value is JSON text. The result is validated as a whole document. */
LIPSCERT_API lipscert_status lipscert_config_set(lipscert_config* cfg, const char* key,
                                                 const char* value_json);
LIPSCERT_API lipscert_status lipscert_config_seed(const lipscert_config* cfg, uint64_t* out);
/* Canonical JSON with every field present. */
LIPSCERT_API lipscert_status lipscert_config_to_json(const lipscert_config* cfg, char** out);

/* ---- model ---- */

LIPSCERT_API lipscert_status lipscert_model_create(const lipscert_config* cfg, lipscert_model** out);
LIPSCERT_API void lipscert_model_free(lipscert_model* model);
LIPSCERT_API lipscert_status lipscert_model_param_count(const lipscert_model* model, size_t* out);
LIPSCERT_API lipscert_status lipscert_model_save(const lipscert_model* model, const char* path);
LIPSCERT_API lipscert_status lipscert_model_load(lipscert_model* model, const char* path);
/* images: batch·H·W·C doubles, channels last. logits: batch·classes doubles. */
LIPSCERT_API lipscert_status lipscert_model_forward(const lipscert_model* model, const double* images,
                                                    size_t batch, double* logits);

/* ---- certification ---- */

typedef struct lipscert_cert_options {
  size_t pairs;       /* random input pairs per layer, >= 1 */
  size_t jac_points;  /* Jacobian probes per layer */
  uint64_t seed;
  int norms;          /* LIPSCERT_NORM_* bits, nonzero */
  int gradcheck;      /* nonzero: run the whole-model gradient check */
} lipscert_cert_options;

/* pairs 1000, jac_points 32, seed 0, both norms, gradcheck on. */
LIPSCERT_API void lipscert_cert_options_default(lipscert_cert_options* opts);

/* A model containing a layer without a finite bound fails with
 * LIPSCERT_ERR_NON_LIPSCHITZ and no report. */
LIPSCERT_API lipscert_status lipscert_certify(const lipscert_model* model,
                                              const lipscert_cert_options* opts,
                                              lipscert_cert_report** out);
LIPSCERT_API void lipscert_cert_report_free(lipscert_cert_report* report);
LIPSCERT_API lipscert_status lipscert_cert_report_pass(const lipscert_cert_report* report, int* pass);
/* Theoretical and empirical whole-model values for one LIPSCERT_NORM_* bit. */
LIPSCERT_API lipscert_status lipscert_cert_report_model(const lipscert_cert_report* report, int norm,
                                                        double* theoretical, double* empirical);
LIPSCERT_API lipscert_status lipscert_cert_report_json(const lipscert_cert_report* report, char** out);

/* ---- gradient check ---- */

typedef struct lipscert_gradcheck_result {
  double max_rel_error;
  size_t checked;   /* coordinates or probe directions compared */
  size_t excluded;  /* coordinates skipped near kinks */
  int pass;
} lipscert_gradcheck_result;

/* Names: lipscert_gradcheck_modules() gives a comma separated list. */
LIPSCERT_API const char* lipscert_gradcheck_modules(void);
/* report_text may be NULL; otherwise it receives a human-readable summary. */
LIPSCERT_API lipscert_status lipscert_gradcheck(const char* module, size_t n, size_t d, double step,
                                                double tol, uint64_t seed,
                                                lipscert_gradcheck_result* result,
                                                char** report_text);

/* ---- training ---- */

/* Trains model on the synthetic dataset described by its config using the
 * config's train section. A diverged run still succeeds with a result. */
LIPSCERT_API lipscert_status lipscert_train(lipscert_model* model, lipscert_train_result** out);
LIPSCERT_API void lipscert_train_result_free(lipscert_train_result* result);
LIPSCERT_API lipscert_status lipscert_train_result_verdict(const lipscert_train_result* result,
                                                           lipscert_verdict* verdict);
LIPSCERT_API lipscert_status lipscert_train_result_summary(const lipscert_train_result* result,
                                                           size_t* steps_run, int* nan_flag,
                                                           double* train_accuracy,
                                                           double* eval_accuracy);
/* CSV with header step,loss,max_act,grad_norm,nan_flag. */
LIPSCERT_API lipscert_status lipscert_train_result_csv(const lipscert_train_result* result, char** out);

/* ---- ablation and plotting ---- */

/* axis: norm, attn, alpha, droppath, warmup or init. values: comma separated.
 * Writes one CSV row per value. */
LIPSCERT_API lipscert_status lipscert_ablate(const lipscert_config* base, const char* axis,
                                             const char* values, char** csv_out);

/* Metrics CSV text to a two-panel SVG. */
LIPSCERT_API lipscert_status lipscert_render_svg(const char* metrics_csv, char** svg_out);

#ifdef __cplusplus
}
#endif

#endif /* LIPSCERT_LIPSCERT_H_ */
