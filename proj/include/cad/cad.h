/*
 *  Copyright 2026 The cookie-ad Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

/* C interface to the cookie-ad anomaly-detection library.
 *
 * Every object is an opaque handle released with its *_free function.
 * Functions return a cad_status; on failure cad_last_error() describes the
 * problem for the calling thread until its next failing call. String
 * outputs use caller buffers: *needed receives the full length including the
 * terminating NUL, and the copy is truncated when capacity is too small. */
#ifndef CAD_CAD_H_
#define CAD_CAD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(CAD_BUILDING_LIBRARY)
#define CAD_API __attribute__((visibility("default")))
#else
#define CAD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cad_status {
  CAD_OK = 0,
  CAD_ERR_INVALID_ARGUMENT = 1,
  CAD_ERR_SHAPE_MISMATCH = 2,
  CAD_ERR_IO = 3,
  CAD_ERR_BAD_HEADER = 4,
  CAD_ERR_TRUNCATED = 5,
  CAD_ERR_UNSUPPORTED_FORMAT = 6,
  CAD_ERR_BAD_MAGIC = 7,
  CAD_ERR_VERSION_MISMATCH = 8,
  CAD_ERR_NUMERICAL = 9,
  CAD_ERR_INFEASIBLE = 10,
  CAD_ERR_DEGENERATE_DATA = 11,
  CAD_ERR_INTERNAL = 99
} cad_status;

typedef struct cad_image cad_image;
typedef struct cad_cae cad_cae;
typedef struct cad_ocsvm cad_ocsvm;
typedef struct cad_config cad_config;
typedef struct cad_report cad_report;

/* Receives one progress line per call. */
typedef void (*cad_log_fn)(const char* line, void* user);

CAD_API const char* cad_version(void);
CAD_API const char* cad_status_name(cad_status status);
CAD_API const char* cad_last_error(void);

/* ---- images ---- */
CAD_API cad_status cad_image_new(int height, int width, int channels, const double* pixels, cad_image** out);
CAD_API cad_status cad_image_load(const char* path, cad_image** out);
CAD_API cad_status cad_image_save(const cad_image* image, const char* path);
CAD_API void cad_image_free(cad_image* image);
CAD_API cad_status cad_image_shape(const cad_image* image, int* height, int* width, int* channels);
/* Copies height*width*channels intensities (row-major, channel-interleaved). */
CAD_API cad_status cad_image_pixels(const cad_image* image, double* buffer, size_t capacity);
CAD_API cad_status cad_image_grayscale(const cad_image* image, cad_image** out);
CAD_API cad_status cad_image_rotate90(const cad_image* image, int quarter_turns, cad_image** out);
CAD_API cad_status cad_image_crop(const cad_image* image, double threshold, cad_image** out);
CAD_API cad_status cad_image_resize(const cad_image* image, int height, int width, cad_image** out);
/* kind: OK, NOT_COMPLETE, STRANGE_OBJECT or COLOR_DEFECT. */
CAD_API cad_status cad_synth_sample(const char* kind, uint64_t seed, int image_size, cad_image** out);

/* ---- metrics ---- */
CAD_API cad_status cad_l2_error(const cad_image* x, const cad_image* xhat, double* out);
CAD_API cad_status cad_ssim(const cad_image* x, const cad_image* xhat, double* out);
/* labels are 0 (negative) or 1 (positive). */
CAD_API cad_status cad_auc(const double* scores, const int* labels, size_t n, double* out);

/* ---- convolutional autoencoder ---- */
/* preset: bae1, bae2 or mvtec. */
CAD_API cad_status cad_cae_init(const char* preset, int input_size, uint64_t seed, cad_cae** out);
CAD_API cad_status cad_cae_load(const char* path, cad_cae** out);
CAD_API cad_status cad_cae_save(const cad_cae* model, const char* path);
CAD_API void cad_cae_free(cad_cae* model);
CAD_API cad_status cad_cae_info(const cad_cae* model, int* input_size, size_t* code_size, size_t* parameter_count);
CAD_API cad_status cad_cae_reconstruct(const cad_cae* model, const cad_image* image, cad_image** out);
CAD_API cad_status cad_cae_encode(const cad_cae* model, const cad_image* image, double* code, size_t capacity);

/* ---- one-class SVM ---- */
/* x is n rows of k values; gamma <= 0 selects the "scale" heuristic. */
CAD_API cad_status cad_ocsvm_fit(const double* x, size_t n, size_t k, double nu, double gamma, cad_ocsvm** out);
CAD_API cad_status cad_ocsvm_load(const char* path, cad_ocsvm** out);
CAD_API cad_status cad_ocsvm_save(const cad_ocsvm* model, const char* path);
CAD_API void cad_ocsvm_free(cad_ocsvm* model);
CAD_API cad_status cad_ocsvm_info(const cad_ocsvm* model, size_t* dim, size_t* support_vectors, double* rho,
                                  double* gamma, int* converged);
CAD_API cad_status cad_ocsvm_decision(const cad_ocsvm* model, const double* x, size_t k, double* out);

/* ---- experiment configuration ---- */
CAD_API cad_status cad_config_new(cad_config** out);
CAD_API cad_status cad_config_new_full_scale(cad_config** out);
CAD_API void cad_config_free(cad_config* config);
CAD_API cad_status cad_config_load(cad_config* config, const char* path);
CAD_API cad_status cad_config_set(cad_config* config, const char* key, const char* value);
CAD_API cad_status cad_config_get(const cad_config* config, const char* key, char* buffer, size_t capacity,
                                  size_t* needed);
CAD_API size_t cad_config_key_count(void);
CAD_API const char* cad_config_key(size_t index);

/* ---- pipeline ---- */
/* stage: synth, train, features, embed, fit-svm or evaluate. report may be
 * NULL; it is set only by evaluate. */
CAD_API cad_status cad_run_stage(const cad_config* config, const char* stage, cad_log_fn log, void* user,
                                 cad_report** report);
/* modes: comma-separated feature modes or "all". Runs synth, train and every
 * mode; report (may be NULL) holds one entry per mode. */
CAD_API cad_status cad_run_all(const cad_config* config, const char* modes, cad_log_fn log, void* user,
                               cad_report** report);

CAD_API void cad_report_free(cad_report* report);
CAD_API size_t cad_report_count(const cad_report* report);
CAD_API cad_status cad_report_auc(const cad_report* report, size_t index, double* out);
CAD_API cad_status cad_report_mode(const cad_report* report, size_t index, char* buffer, size_t capacity,
                                   size_t* needed);
CAD_API cad_status cad_report_text(const cad_report* report, size_t index, char* buffer, size_t capacity,
                                   size_t* needed);
CAD_API cad_status cad_report_kv(const cad_report* report, size_t index, char* buffer, size_t capacity,
                                 size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* CAD_CAD_H_ */
