/* SPDX-License-Identifier: MIT OR Apache-2.0 */

#ifndef STEERLAB_H
#define STEERLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Pass as `target` to sl_attribute to attribute the predicted class.
#define SL_TARGET_PREDICTED SIZE_MAX

// Cosine scoring mode for [`sl_predict`] and [`sl_attribute`].
#define SL_SCORE_COSINE 0

// Dot-product scoring mode.
#define SL_SCORE_DOT 1



typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_UTF8 = 2,
  SL_STATUS_IO = 3,
  SL_STATUS_FORMAT = 4,
  SL_STATUS_DIM_MISMATCH = 5,
  SL_STATUS_INVALID_STEERING = 6,
  SL_STATUS_UNKNOWN_CLASS = 7,
  SL_STATUS_ZERO_NORM = 8,
  SL_STATUS_BUFFER_TOO_SMALL = 9,
  SL_STATUS_INVALID_ARGUMENT = 10,
  SL_STATUS_PANIC = 11,
} SlStatus;

// A loaded class set with NUL-terminated copies of its labels.
typedef struct SlClassSet SlClassSet;

// A loaded sparse autoencoder.
typedef struct SlSae SlSae;

// A mutable steering configuration.
typedef struct SlSteering SlSteering;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sl_version(void);

// Message describing the last failed call on this thread; empty after a
// successful call. Valid until the next call on this thread.
const char *sl_last_error_message(void);

// Loads an SAE1 checkpoint into `*out`.
enum SlStatus sl_sae_load(const char *path, struct SlSae **out);

void sl_sae_free(struct SlSae *sae);

// Embedding dimension, or 0 for a null handle.
size_t sl_sae_dim_in(const struct SlSae *sae);

// Number of components, or 0 for a null handle.
size_t sl_sae_dim_sae(const struct SlSae *sae);

// Writes the `dim_sae` activations of `x` into `out`.
enum SlStatus sl_sae_encode(const struct SlSae *sae,
                            const float *x,
                            size_t dim,
                            double *out,
                            size_t out_len);

// Loads a class-set file (EMB1 with class names as labels) into `*out`.
enum SlStatus sl_class_set_load(const char *path, struct SlClassSet **out);

void sl_class_set_free(struct SlClassSet *classes);

// Number of classes, or 0 for a null handle.
size_t sl_class_set_len(const struct SlClassSet *classes);

// Label of class `index`, owned by the handle; null when out of range.
const char *sl_class_set_label(const struct SlClassSet *classes, size_t index);

// A new empty steering configuration.
struct SlSteering *sl_steering_new(void);

void sl_steering_free(struct SlSteering *steering);

// Sets the strength of `component` to `m` in [-1, 1]; replaces any previous
// value for that component.
enum SlStatus sl_steering_set(struct SlSteering *steering, size_t component, double m);

enum SlStatus sl_steering_clear(struct SlSteering *steering);

// Predicts over the class set after steering (`steering` may be null).
//
// `probabilities` must hold `sl_class_set_len` values; `logits` and
// `predicted` may be null.
enum SlStatus sl_predict(const struct SlSae *sae,
                         const struct SlClassSet *classes,
                         const float *x,
                         size_t dim,
                         const struct SlSteering *steering,
                         uint32_t mode,
                         double logit_scale,
                         double *probabilities,
                         double *logits,
                         size_t n_classes,
                         size_t *predicted);

// Per-component attribution `a'_j * dy/da'_j` for the logit of class
// `target` (or [`SL_TARGET_PREDICTED`]). `attributions` must hold
// `sl_sae_dim_sae` values; `logit` may be null.
enum SlStatus sl_attribute(const struct SlSae *sae,
                           const struct SlClassSet *classes,
                           const float *x,
                           size_t dim,
                           const struct SlSteering *steering,
                           size_t target,
                           uint32_t mode,
                           double logit_scale,
                           double *attributions,
                           size_t n_components,
                           double *logit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STEERLAB_H */
