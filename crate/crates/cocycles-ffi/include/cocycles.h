#ifndef COCYCLES_H
#define COCYCLES_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Training objective selector for [`ccx_fit_cmmd`].
 */
typedef enum {
  CCX_LOSS_CMMD_V = 0,
  CCX_LOSS_CMMD_U = 1,
} CcxLoss;

/**
 * Result codes for every FFI entry point.
 */
typedef enum {
  CCX_STATUS_OK = 0,
  CCX_STATUS_NULL_POINTER = 1,
  CCX_STATUS_INVALID_UTF8 = 2,
  CCX_STATUS_PARSE_ERROR = 3,
  CCX_STATUS_SHAPE_MISMATCH = 4,
  CCX_STATUS_RUNTIME_ERROR = 5,
  CCX_STATUS_PANIC = 6,
} CcxStatus;

/**
 * Opaque fitted model handle.
 */
typedef struct CcxModel CcxModel;

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *ccx_last_error_message(void);

/**
 * Library version as a static C string.
 */
const char *ccx_version(void);

/**
 * Rebuilds a model from its persisted JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
CcxStatus ccx_model_from_json(const char *json, CcxModel **out);

/**
 * Serializes a model to JSON. Free the string with [`ccx_string_free`].
 *
 * # Safety
 * `model` must be a live handle from this library; `out` must be valid.
 */
CcxStatus ccx_model_to_json(const CcxModel *model, char **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void ccx_model_free(CcxModel *model);

/**
 * # Safety
 * `s` must be a string returned by this library and not yet freed.
 */
void ccx_string_free(char *s);

/**
 * Context dimension (treatment + covariates) of a model.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid.
 */
CcxStatus ccx_model_context_dim(const CcxModel *model, uintptr_t *out);

/**
 * Outcome dimension of a model.
 *
 * # Safety
 * `model` must be a live handle; `out` must be valid.
 */
CcxStatus ccx_model_outcome_dim(const CcxModel *model, uintptr_t *out);

/**
 * Evaluates the transport `T[ctx_to, ctx_from](y)` for one outcome vector.
 * `ctx_to` and `ctx_from` hold `ctx_len` values; `y` and `out` hold `y_len`.
 *
 * # Safety
 * All pointers must reference arrays of the stated lengths.
 */
CcxStatus ccx_model_transport(const CcxModel *model,
                              const double *ctx_to,
                              const double *ctx_from,
                              uintptr_t ctx_len,
                              const double *y,
                              uintptr_t y_len,
                              double *out);

/**
 * Imputes counterfactual outcomes at a fixed treatment level for `n` units.
 * `x`, `z`, `y` are row-major with the stated column counts (`z` may be
 * null when `z_dim` is 0); `out` receives `n * y_dim` values.
 *
 * # Safety
 * All pointers must reference arrays of the stated shapes.
 */
CcxStatus ccx_model_impute_level(const CcxModel *model,
                                 const double *x,
                                 uintptr_t x_dim,
                                 const double *z,
                                 uintptr_t z_dim,
                                 const double *y,
                                 uintptr_t y_dim,
                                 uintptr_t n,
                                 const double *level,
                                 double *out);

/**
 * Fits a cocycle of the named architecture (`linear`, `additive-mlp`,
 * `triangular-affine`, `masked-affine`, `spline`) on row-major data.
 * `discrete_levels` > 0 selects constant-table conditioners over that many
 * treatment levels; 0 means a continuous conditioner. A `batch_size` of 0
 * uses the default min(n, 128).
 *
 * # Safety
 * Array pointers must reference arrays of the stated shapes.
 */
CcxStatus ccx_fit_cmmd(const char *architecture_id,
                       uintptr_t discrete_levels,
                       CcxLoss loss,
                       const double *x,
                       uintptr_t x_dim,
                       const double *z,
                       uintptr_t z_dim,
                       const double *y,
                       uintptr_t y_dim,
                       uintptr_t n,
                       uintptr_t epochs,
                       uintptr_t batch_size,
                       double learning_rate,
                       uint64_t seed,
                       CcxModel **out);

#endif  /* COCYCLES_H */
