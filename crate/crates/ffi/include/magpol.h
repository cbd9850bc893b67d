#ifndef MAGPOL_H
#define MAGPOL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MagpolStatus {
  MAGPOL_STATUS_OK = 0,
  MAGPOL_STATUS_NULL_POINTER = 1,
  MAGPOL_STATUS_INVALID_PARAMETER = 2,
  MAGPOL_STATUS_DOMAIN = 3,
  MAGPOL_STATUS_SINGULAR = 4,
  MAGPOL_STATUS_NO_SOLUTION = 5,
  MAGPOL_STATUS_BUFFER_TOO_SMALL = 6,
  MAGPOL_STATUS_PANIC = 7,
} MagpolStatus;

typedef enum MagpolRegime {
  MAGPOL_REGIME_MIT = 0,
  MAGPOL_REGIME_MIABS = 1,
  MAGPOL_REGIME_MIAMP = 2,
  MAGPOL_REGIME_FANO = 3,
  MAGPOL_REGIME_NULL = 4,
} MagpolRegime;

/**
 * Opaque device + drive.
 */
typedef struct MagpolModel MagpolModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model. Rates in MHz; `magnon_offset` is `ω_m − ω_c`.
 * The drive starts at zero pump with offset π. Free with [`magpol_model_free`].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MagpolStatus magpol_model_new(double coupling_g,
                                   double kappa_c,
                                   double kappa_m,
                                   double kappa_c1,
                                   double kappa_m1,
                                   double magnon_offset,
                                   struct MagpolModel **out);

/**
 * # Safety
 * `model` must come from [`magpol_model_new`] and not be used afterwards. Null is ignored.
 */
void magpol_model_free(struct MagpolModel *model);

/**
 * Sets pump/probe ratio, relative phase and calibration offset (radians).
 *
 * # Safety
 * `model` must be a live handle.
 */
enum MagpolStatus magpol_model_set_drive(struct MagpolModel *model,
                                         double ratio_delta,
                                         double phase_phi,
                                         double phase_offset);

/**
 * Complex transmission at probe detuning `detuning` (MHz).
 *
 * # Safety
 * `model` must be a live handle; `re`, `im` writable.
 */
enum MagpolStatus magpol_transmission(const struct MagpolModel *model,
                                      double detuning,
                                      double *re,
                                      double *im);

/**
 * `|t|` on `count` evenly spaced detunings from `start` to `stop`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `out_len` doubles.
 */
enum MagpolStatus magpol_magnitude_trace(const struct MagpolModel *model,
                                         double start,
                                         double stop,
                                         size_t count,
                                         double *out,
                                         size_t out_len);

/**
 * Group delay in µs at one detuning.
 *
 * # Safety
 * `model` must be a live handle; `out` writable.
 */
enum MagpolStatus magpol_group_delay(const struct MagpolModel *model, double detuning, double *out);

/**
 * Smallest ratio in `[0, max_ratio]` with vanishing reflection at effective
 * phase `phase_eff`; `NoSolution` if there is none. Ignores the stored drive.
 *
 * # Safety
 * `model` must be a live handle; `ratio_delta`, `detuning` writable.
 */
enum MagpolStatus magpol_find_zero_reflection(const struct MagpolModel *model,
                                              double phase_eff,
                                              double max_ratio,
                                              double *ratio_delta,
                                              double *detuning);

/**
 * Regime of the current drive, judged on a grid wide enough to show the baseline.
 *
 * # Safety
 * `model` must be a live handle; `out` writable.
 */
enum MagpolStatus magpol_classify(const struct MagpolModel *model, enum MagpolRegime *out);

/**
 * Message of the last failed call on this thread, `""` after a success.
 * Valid until the next call on the same thread.
 */
const char *magpol_last_error_message(void);

const char *magpol_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAGPOL_H */
