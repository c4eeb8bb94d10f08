/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SLR_H
#define SLR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Number of landmarks per frame.
 */
#define SLR_NUM_LANDMARKS 21

/*
 Length of a feature vector.
 */
#define SLR_NUM_FEATURES 42

/*
 Number of output classes (letters A to Z).
 */
#define SLR_NUM_CLASSES 26

/*
 Result code of every exported function.
 */
typedef enum SlrStatus {
  SLR_STATUS_OK = 0,
  SLR_STATUS_NULL_POINTER = 1,
  SLR_STATUS_INVALID_UTF8 = 2,
  SLR_STATUS_IO = 3,
  SLR_STATUS_FORMAT = 4,
  SLR_STATUS_BAD_LANDMARK_COUNT = 5,
  SLR_STATUS_NON_FINITE = 6,
  SLR_STATUS_DEGENERATE_HAND = 7,
  SLR_STATUS_PANIC = 8,
} SlrStatus;

/*
 A loaded classifier. Immutable after loading, so one handle may be shared
 by several threads.
 */
typedef struct SlrModel SlrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Loads a model weight file and stores a new handle in `*out`.

 `*out` is set to null on failure.

 # Safety
 `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum SlrStatus slr_model_load(const char *path, struct SlrModel **out);

/*
 Releases a handle from [`slr_model_load`]. Null is ignored.

 # Safety
 `model` must be null or a handle not yet freed.
 */
void slr_model_free(struct SlrModel *model);

/*
 Normalizes a frame into `SLR_NUM_FEATURES` values written to `out`.

 # Safety
 `xy` must hold `2 * n_points` doubles; `out` must hold `SLR_NUM_FEATURES`.
 */
enum SlrStatus slr_extract_features(const double *xy, size_t n_points, double *out);

/*
 Classifies a frame.

 Writes the winning class index (0 for 'A' through 25 for 'Z') and its
 probability. If `out_probs` is not null it receives all
 `SLR_NUM_CLASSES` probabilities.

 # Safety
 `model` must be a live handle, `xy` must hold `2 * n_points` doubles and
 `out_probs` must be null or hold `SLR_NUM_CLASSES` doubles.
 */
enum SlrStatus slr_predict(const struct SlrModel *model,
                           const double *xy,
                           size_t n_points,
                           uint32_t *out_index,
                           double *out_confidence,
                           double *out_probs);

/*
 Answers one protocol message, exactly as the server would.

 `*out` receives a newly allocated JSON response (prediction or error)
 to be released with [`slr_string_free`]. Protocol-level errors are part of
 the response, so the status is `SLR_STATUS_OK` for any input bytes.

 # Safety
 `model` must be a live handle, `message` a nul-terminated string and
 `out` a writable pointer.
 */
enum SlrStatus slr_handle_message(const struct SlrModel *model, const char *message, char **out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void slr_string_free(char *s);

/*
 Message describing the last failure on the calling thread, or null.

 The pointer stays valid until the next failing call on the same thread.
 */
const char *slr_last_error_message(void);

/*
 Library version as a static nul-terminated string.
 */
const char *slr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLR_H */
