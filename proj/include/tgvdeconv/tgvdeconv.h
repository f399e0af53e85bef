/*
 * Copyright 2026 The tgvdeconv Authors
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

/*
 * tgvdeconv C interface.
 *
 * All objects are opaque and owned by the caller once returned; release
 * them with the matching *_free function (NULL is accepted). Functions
 * returning tgvd_status leave a thread-local message readable through
 * tgvd_last_error() when they fail.
 */
#ifndef TGVDECONV_H
#define TGVDECONV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TGVD_BUILDING_LIBRARY)
#    define TGVD_API __declspec(dllexport)
#  else
#    define TGVD_API __declspec(dllimport)
#  endif
#else
#  define TGVD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tgvd_status {
  TGVD_OK = 0,
  TGVD_ERR_INVALID_ARGUMENT = 1,
  TGVD_ERR_CONFIG = 2,
  TGVD_ERR_NUMERICAL = 3,
  TGVD_ERR_IO = 4,
  TGVD_ERR_INTERNAL = 5
} tgvd_status;

typedef struct tgvd_image tgvd_image;
typedef struct tgvd_kernel tgvd_kernel;
typedef struct tgvd_config tgvd_config;
typedef struct tgvd_result tgvd_result;

TGVD_API const char* tgvd_version(void);
TGVD_API const char* tgvd_last_error(void);
TGVD_API const char* tgvd_status_string(tgvd_status status);
/* Caps worker threads; n <= 0 restores the default. Overrides
 * TGVDECONV_THREADS. */
TGVD_API void tgvd_set_threads(int n);

/* Images: row-major doubles, nominally in [0, 1]. */
/* data may be NULL for a zero image. */
TGVD_API tgvd_status tgvd_image_create(int height, int width, const double* data,
                                       tgvd_image** out);
/* .png, .pgm or .f64; colour is reduced to luminance. */
TGVD_API tgvd_status tgvd_image_load(const char* path, tgvd_image** out);
/* .png and .pgm quantise to 8 bits; .f64 is lossless. */
TGVD_API tgvd_status tgvd_image_save(const tgvd_image* img, const char* path);
TGVD_API int tgvd_image_height(const tgvd_image* img);
TGVD_API int tgvd_image_width(const tgvd_image* img);
TGVD_API const double* tgvd_image_data(const tgvd_image* img);
TGVD_API void tgvd_image_free(tgvd_image* img);
/* Procedural piecewise-smooth test scene. */
TGVD_API tgvd_status tgvd_make_pattern(int height, int width, uint64_t seed,
                                       tgvd_image** out);

/* Kernels: odd size, nonnegative, unit sum. */
TGVD_API tgvd_status tgvd_kernel_create(int size, const double* weights,
                                        tgvd_kernel** out);
/* "gaussian:K:sigma", "motion:K:length:angle" or "file:path". */
TGVD_API tgvd_status tgvd_kernel_from_spec(const char* spec, tgvd_kernel** out);
/* Text matrix, or an image renormalised to unit sum. */
TGVD_API tgvd_status tgvd_kernel_load(const char* path, tgvd_kernel** out);
TGVD_API tgvd_status tgvd_kernel_save_text(const tgvd_kernel* k, const char* path);
TGVD_API tgvd_status tgvd_kernel_save_image(const tgvd_kernel* k, const char* path);
TGVD_API int tgvd_kernel_size(const tgvd_kernel* k);
TGVD_API const double* tgvd_kernel_data(const tgvd_kernel* k);
TGVD_API void tgvd_kernel_free(tgvd_kernel* k);

/* s = k (x) clean + noise. boundary is "circular" (NULL) or "replicate". */
TGVD_API tgvd_status tgvd_synthesize(const tgvd_image* clean, const tgvd_kernel* k,
                                     double noise_sigma, uint64_t seed,
                                     const char* boundary, tgvd_image** out);

/* Solver configuration as key/value strings. */
TGVD_API tgvd_status tgvd_config_create(tgvd_config** out);
TGVD_API tgvd_status tgvd_config_set(tgvd_config* cfg, const char* key,
                                     const char* value);
TGVD_API tgvd_status tgvd_config_load_file(tgvd_config* cfg, const char* path);
/* Both string getters copy up to len - 1 bytes plus a terminator and return
 * the full length, so a call with len 0 sizes the buffer. */
TGVD_API size_t tgvd_config_get(const tgvd_config* cfg, const char* key, char* buf,
                                size_t len);
TGVD_API size_t tgvd_config_dump(const tgvd_config* cfg, char* buf, size_t len);
/* Architecture descriptors of the generators a solve would build. A
 * kernel_size of 0 describes the non-blind setup. */
TGVD_API size_t tgvd_config_architecture(const tgvd_config* cfg, int kernel_size,
                                         char* buf, size_t len);
TGVD_API tgvd_status tgvd_config_validate(const tgvd_config* cfg);
TGVD_API void tgvd_config_free(tgvd_config* cfg);

typedef struct tgvd_iteration {
  int iteration;
  double loss;
  double residual_g;
  double residual_h;
  double kernel_entropy;
} tgvd_iteration;

typedef void (*tgvd_iteration_fn)(const tgvd_iteration* record, void* user);

/* *out is set whenever the solve started, including after a numerical
 * failure; it then carries the diagnostics gathered so far and no image.
 * cfg may be NULL for defaults. */
TGVD_API tgvd_status tgvd_solve_blind(const tgvd_image* blurred, int kernel_size,
                                      const tgvd_config* cfg, tgvd_iteration_fn cb,
                                      void* user, tgvd_result** out);
TGVD_API tgvd_status tgvd_solve_nonblind(const tgvd_image* blurred,
                                         const tgvd_kernel* k, const tgvd_config* cfg,
                                         tgvd_iteration_fn cb, void* user,
                                         tgvd_result** out);
/* Borrowed pointers, valid until the result is freed. NULL after a failure. */
TGVD_API const tgvd_image* tgvd_result_image(const tgvd_result* r);
TGVD_API const tgvd_kernel* tgvd_result_kernel(const tgvd_result* r);
TGVD_API size_t tgvd_result_iterations(const tgvd_result* r);
TGVD_API tgvd_status tgvd_result_iteration(const tgvd_result* r, size_t index,
                                           tgvd_iteration* out);
TGVD_API long tgvd_result_optimiser_steps(const tgvd_result* r);
/* Generator parameters of a finished solve. */
TGVD_API tgvd_status tgvd_result_save_checkpoint(const tgvd_result* r,
                                                 const char* path);
TGVD_API void tgvd_result_free(tgvd_result* r);

/* Metrics. */
TGVD_API tgvd_status tgvd_psnr(const tgvd_image* a, const tgvd_image* b, double peak,
                               double* out);
TGVD_API tgvd_status tgvd_ssim(const tgvd_image* a, const tgvd_image* b, double* out);

typedef struct tgvd_kernel_error {
  double aligned_mse;
  double plain_mse;
  double aligned_sse;
  int shift_x;
  int shift_y;
} tgvd_kernel_error;

TGVD_API tgvd_status tgvd_kernel_error_compute(const tgvd_kernel* estimate,
                                               const tgvd_kernel* truth,
                                               tgvd_kernel_error* out);

typedef void (*tgvd_selftest_fn)(const char* name, int passed, double value,
                                 double tolerance, void* user);
/* failures may be NULL. */
TGVD_API tgvd_status tgvd_selftest(tgvd_selftest_fn cb, void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif /* TGVDECONV_H */
