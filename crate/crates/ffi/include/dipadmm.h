#ifndef DIPADMM_H
#define DIPADMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes shared by all functions.
 */
typedef enum DipStatus {
  DIP_STATUS_OK = 0,
  DIP_STATUS_NULL_POINTER = 1,
  DIP_STATUS_INVALID_ARGUMENT = 2,
  DIP_STATUS_SHAPE_MISMATCH = 3,
  DIP_STATUS_INVALID_CONFIG = 4,
  DIP_STATUS_NOT_CONVERGED = 5,
  DIP_STATUS_FINGERPRINT_MISMATCH = 6,
  DIP_STATUS_NON_FINITE = 7,
  DIP_STATUS_IO = 8,
  DIP_STATUS_PANIC = 9,
} DipStatus;

/*
 A generator: architecture, output shape and initial weights.
 */
typedef struct DipGenerator DipGenerator;

/*
 Leading eigenpairs of `J J^T`.
 */
typedef struct DipSpectrum DipSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 The message for the last failed call on this thread; empty after a
 success. Valid until the next call into this library on the thread.
 */
const char *dip_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *dip_version(void);

/*
 Builds a generator for `height x width x channels` outputs.

 `level_channels` lists `levels` channel counts; pass `levels = 0` for the
 default architecture. `input_channels = 0` also means the default.

 # Safety
 `level_channels` must point to `levels` values when `levels > 0`; `out`
 must be writable.
 */
enum DipStatus dip_generator_new(const size_t *level_channels,
                                 size_t levels,
                                 size_t input_channels,
                                 uint64_t seed,
                                 size_t height,
                                 size_t width,
                                 size_t channels,
                                 struct DipGenerator **out);

/*
 # Safety
 `g` must be null or a handle from [`dip_generator_new`] not yet freed.
 */
void dip_generator_free(struct DipGenerator *g);

/*
 Number of weights, or 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
size_t dip_generator_weight_count(const struct DipGenerator *g);

/*
 Number of output values, or 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
size_t dip_generator_output_len(const struct DipGenerator *g);

/*
 Copies the initial weights into `theta`.

 # Safety
 `g` must be a live handle and `theta` must hold `len` doubles.
 */
enum DipStatus dip_generator_theta0(const struct DipGenerator *g, double *theta, size_t len);

/*
 `G(theta)` into `image`.

 # Safety
 `g` must be a live handle; `theta` and `image` must hold the given counts.
 */
enum DipStatus dip_generator_forward(const struct DipGenerator *g,
                                     const double *theta,
                                     size_t theta_len,
                                     double *image,
                                     size_t image_len);

/*
 `J(theta)^T seed`, the weight gradient of any loss whose output gradient
 is `seed`.

 # Safety
 `g` must be a live handle; all buffers must hold the given counts.
 */
enum DipStatus dip_generator_loss_grad(const struct DipGenerator *g,
                                       const double *theta,
                                       size_t theta_len,
                                       const double *seed,
                                       size_t seed_len,
                                       double *grad,
                                       size_t grad_len);

/*
 Top-`k` eigenpairs of `J J^T` at the initial weights.

 When Lanczos stops early the status is `NotConverged` and `out` still
 receives the pairs that did converge.

 # Safety
 `g` must be a live handle and `out` writable.
 */
enum DipStatus dip_spectrum_compute(const struct DipGenerator *g,
                                    size_t k,
                                    uint64_t seed,
                                    struct DipSpectrum **out);

/*
 Reads a spectrum file written by the command-line tool.

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum DipStatus dip_spectrum_read(const char *path, struct DipSpectrum **out);

/*
 # Safety
 `s` must be null or a live spectrum handle.
 */
void dip_spectrum_free(struct DipSpectrum *s);

/*
 Number of eigenpairs held, or 0 for a null handle.

 # Safety
 `s` must be null or a live handle.
 */
size_t dip_spectrum_k(const struct DipSpectrum *s);

/*
 Length of each eigenvector, or 0 for a null handle.

 # Safety
 `s` must be null or a live handle.
 */
size_t dip_spectrum_n(const struct DipSpectrum *s);

/*
 Copies the eigenvalues, largest first.

 # Safety
 `s` must be a live handle and `values` must hold `len` doubles.
 */
enum DipStatus dip_spectrum_eigenvalues(const struct DipSpectrum *s, double *values, size_t len);

/*
 Copies eigenvector `index`.

 # Safety
 `s` must be a live handle and `vector` must hold `len` doubles.
 */
enum DipStatus dip_spectrum_vector(const struct DipSpectrum *s,
                                   size_t index,
                                   double *vector,
                                   size_t len);

/*
 `argmin_x 1/2 ||x - v||^2 + lambda sum |x_{i+1} - x_i|`.

 # Safety
 `v` and `out` must hold `len` doubles; they may alias.
 */
enum DipStatus dip_prox_tv1d(const double *v, size_t len, double lambda, double *out);

/*
 Anisotropic 2D total-variation prox, per channel.

 # Safety
 `image` and `out` must hold `height * width * channels` doubles.
 */
enum DipStatus dip_prox_tv2d(const double *image,
                             size_t height,
                             size_t width,
                             size_t channels,
                             double lambda,
                             double *out);

/*
 Elementwise `sign(v) max(|v| - lambda, 0)`.

 # Safety
 `v` and `out` must hold `len` doubles.
 */
enum DipStatus dip_soft_threshold(const double *v, size_t len, double lambda, double *out);

/*
 Non-local means with a 7x7 patch.

 # Safety
 `image` and `out` must hold `height * width * channels` doubles.
 */
enum DipStatus dip_nlm_denoise(const double *image,
                               size_t height,
                               size_t width,
                               size_t channels,
                               double sigma,
                               size_t patch_distance,
                               double cutoff,
                               double *out);

/*
 PSNR in dB of `image` against `reference`, peak taken from the reference.

 # Safety
 Both arrays must hold `len` doubles; `out` must be writable.
 */
enum DipStatus dip_psnr(const double *reference, const double *image, size_t len, double *out);

/*
 Runs one experiment described by `key=value` lines (the config file
 format) and fills its output directory. `final_psnr` may be null; it
 receives NaN when the run has no ground truth.

 # Safety
 `config` must be a NUL-terminated string; `final_psnr` null or writable.
 */
enum DipStatus dip_run_experiment(const char *config, double *final_psnr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIPADMM_H */
