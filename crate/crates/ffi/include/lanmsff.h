#ifndef LANMSFF_H
#define LANMSFF_H

/* Generated by cbindgen from the lanmsff-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum LanmsffStatus {
  LanmsffStatus_Ok = 0,
  // A pointer argument was null or an argument was structurally invalid.
  LanmsffStatus_InvalidArgument = 1,
  // The configuration violates an architecture constraint.
  LanmsffStatus_InvalidConfig = 2,
  // Malformed input data or weight file.
  LanmsffStatus_DataError = 3,
  // Filesystem failure.
  LanmsffStatus_IoError = 4,
  // Any other runtime failure.
  LanmsffStatus_RuntimeError = 5,
} LanmsffStatus;

// Opaque model handle.
typedef struct LanmsffModel LanmsffModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library; static storage, do not free.
const char *lanmsff_version(void);

// Message of the last failure on this thread, or null. Valid until the next
// library call on the same thread; do not free.
const char *lanmsff_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer previously returned by a `lanmsff_*`
// function documented as caller-owned, not yet freed.
void lanmsff_string_free(char *s);

// Builds a model. `config_json` is the canonical configuration document
// (null for the published default architecture); `seed` drives weight
// initialization. On success writes a handle to `out_model`.
//
// # Safety
// `config_json` must be null or a valid NUL-terminated string; `out_model`
// must be a valid pointer.
enum LanmsffStatus lanmsff_model_new(const char *config_json,
                                     uint64_t seed,
                                     struct LanmsffModel **out_model);

// Loads weights saved by [`lanmsff_model_save`]. The configuration must
// match the file's config hash.
//
// # Safety
// `path` must be a valid NUL-terminated string; `config_json` null or valid;
// `out_model` a valid pointer.
enum LanmsffStatus lanmsff_model_load(const char *path,
                                      const char *config_json,
                                      struct LanmsffModel **out_model);

// Serializes the model's weights (32-bit floats, checksummed container).
//
// # Safety
// `model` must be a live handle from this library; `path` a valid
// NUL-terminated string.
enum LanmsffStatus lanmsff_model_save(const struct LanmsffModel *model, const char *path);

// Destroys a handle. Passing null is a no-op.
//
// # Safety
// `model` must be null or a live handle from this library, not yet freed.
void lanmsff_model_free(struct LanmsffModel *model);

// Number of output classes, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t lanmsff_model_num_classes(const struct LanmsffModel *model);

// Expected input edge length (images are square), or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t lanmsff_model_input_size(const struct LanmsffModel *model);

// Expected input channel count, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t lanmsff_model_input_channels(const struct LanmsffModel *model);

// Parameter count; `trainable_only` excludes the frozen normalization
// statistics.
//
// # Safety
// `model` must be null (returns 0) or a live handle.
uint64_t lanmsff_model_param_count(const struct LanmsffModel *model, bool trainable_only);

// Runs inference on `batch` images packed as
// `batch * channels * size * size` doubles in [0, 1], NCHW order, and
// writes `batch * num_classes` class probabilities to `out_probs`.
//
// # Safety
// `model` must be a live handle; `pixels` must point to `pixels_len`
// doubles; `out_probs` must have room for `out_len` doubles.
enum LanmsffStatus lanmsff_model_predict(const struct LanmsffModel *model,
                                         const double *pixels,
                                         size_t pixels_len,
                                         size_t batch,
                                         double *out_probs,
                                         size_t out_len);

// Full parameter audit as a JSON document. The caller owns the returned
// string (free with [`lanmsff_string_free`]); null on failure.
//
// # Safety
// `model` must be null (returns null) or a live handle.
char *lanmsff_model_audit_json(const struct LanmsffModel *model);

// Information density: accuracy percent per million parameters.
//
// # Safety
// `out` must be a valid pointer.
enum LanmsffStatus lanmsff_information_density(double accuracy_pct,
                                               uint64_t param_count,
                                               double *out);

// Pose variance: population variance of the per-pose accuracies together
// with the overall accuracy.
//
// # Safety
// `accuracies` must point to `n` doubles; `out` must be valid.
enum LanmsffStatus lanmsff_pose_variance(const double *accuracies,
                                         size_t n,
                                         double overall,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANMSFF_H */
