/* C interface to the radclass report classification library. */

#ifndef RADCLASS_H
#define RADCLASS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a C API call.
 */
typedef enum RadclassStatus {
  /**
   * The call succeeded.
   */
  RADCLASS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RADCLASS_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  RADCLASS_STATUS_INVALID_UTF8 = 2,
  /**
   * A file could not be read or written.
   */
  RADCLASS_STATUS_IO = 3,
  /**
   * An artifact could not be parsed or failed validation.
   */
  RADCLASS_STATUS_PARSE = 4,
  /**
   * The operation itself failed; see `radclass_last_error`.
   */
  RADCLASS_STATUS_RUNTIME = 5,
} RadclassStatus;

/**
 * Opaque handle to a fitted n-gram threshold baseline artifact.
 */
typedef struct RadclassBaseline RadclassBaseline;

/**
 * Opaque handle to a trained classifier artifact.
 */
typedef struct RadclassModel RadclassModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the error message of the most recent failed call on this
 * thread, or an empty string. The pointer stays valid until the next
 * failed call on the same thread.
 */
const char *radclass_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have been returned by a radclass function and not freed yet.
 */
void radclass_string_free(char *s);

/**
 * Loads a classifier artifact written by the trainer.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must point to writable
 * memory for one pointer.
 */
enum RadclassStatus radclass_model_load(const char *path, struct RadclassModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must have come from `radclass_model_load` and not be freed yet.
 */
void radclass_model_free(struct RadclassModel *model);

/**
 * Classifies one report text. On success `*out_json` receives a JSON
 * object `{"label": ..., "scores": {class: score, ...}}` owned by the
 * caller.
 *
 * # Safety
 * `model` must be a live handle; `text` must be NUL-terminated; `out_json`
 * must point to writable memory for one pointer.
 */
enum RadclassStatus radclass_model_predict_json(const struct RadclassModel *model,
                                                const char *text,
                                                char **out_json);

/**
 * Describes a loaded model. On success `*out_json` receives a JSON object
 * `{"task": ..., "family": ..., "classes": [...], "vocabulary": n}` owned
 * by the caller.
 *
 * # Safety
 * `model` must be a live handle; `out_json` must point to writable memory
 * for one pointer.
 */
enum RadclassStatus radclass_model_info_json(const struct RadclassModel *model, char **out_json);

/**
 * Loads an n-gram baseline artifact written by the baseline fitter.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must point to writable
 * memory for one pointer.
 */
enum RadclassStatus radclass_baseline_load(const char *path, struct RadclassBaseline **out);

/**
 * Releases a baseline handle. Null is ignored.
 *
 * # Safety
 * `baseline` must have come from `radclass_baseline_load` and not be
 * freed yet.
 */
void radclass_baseline_free(struct RadclassBaseline *baseline);

/**
 * Applies the baseline to one report text. On success `*out_json`
 * receives a JSON object `{"label": ..., "positive": bool, "fraction":
 * f}` owned by the caller.
 *
 * # Safety
 * `baseline` must be a live handle; `text` must be NUL-terminated;
 * `out_json` must point to writable memory for one pointer.
 */
enum RadclassStatus radclass_baseline_classify_json(const struct RadclassBaseline *baseline,
                                                    const char *text,
                                                    char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RADCLASS_H */
