#ifndef TFORMS_H
#define TFORMS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. `TF_OK` is zero; everything else is a failure whose
// message is available from `tf_last_error`.
typedef enum TfStatus {
  TF_OK = 0,
  TF_NULL_ARGUMENT = 1,
  TF_INVALID_UTF8 = 2,
  TF_PARSE = 3,
  TF_VALIDATION = 4,
  TF_NUMERICAL = 5,
  TF_DIMENSION = 6,
  TF_GERM = 7,
  TF_HYPOTHESIS = 8,
  TF_CERTIFICATE = 9,
  TF_IO = 10,
  TF_PANIC = 11,
} TfStatus;

// Which part of the seeded property suite `tf_check` runs.
typedef enum TfSuite {
  TF_SUITE_ALL = 0,
  TF_SUITE_LINALG = 1,
  TF_SUITE_FORMS = 2,
  TF_SUITE_CLASSIFY = 3,
} TfSuite;

// A torsion Hermitian form.
typedef struct TfForm TfForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string.
const char *tf_version(void);

// Message of the last failure on this thread, or NULL after a success.
// Valid until the next call into the library from the same thread.
const char *tf_last_error(void);

// Releases a string returned by the library. NULL is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void tf_string_free(char *s);

// Form described by a problem document (JSON text). Data files are
// resolved against `base_dir`, which may be NULL for the current
// directory. `grid` = 0 keeps the document's grid.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum TfStatus tf_form_from_json(const char *json_text,
                                const char *base_dir,
                                size_t grid,
                                struct TfForm **out);

// Form described by a problem file on disk.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum TfStatus tf_form_from_file(const char *path, size_t grid, struct TfForm **out);

// Discriminant form of a sampled Hermitian field: `grid` fibers of size
// `dim × dim`, row-major, each entry as interleaved (re, im) doubles, so
// `data` holds `2·dim²·grid` values.
//
// # Safety
// `data` must point to that many readable doubles; `out` must be writable.
enum TfStatus tf_form_from_samples(const double *data,
                                   size_t dim,
                                   size_t grid,
                                   struct TfForm **out);

// Releases a form. NULL is ignored.
//
// # Safety
// `form` must come from this library and must not be used afterwards.
void tf_form_free(struct TfForm *form);

// Fiber dimension and whether the form is given symbolically.
//
// # Safety
// `form` must be a live handle; the outputs must be writable.
enum TfStatus tf_form_info(const struct TfForm *form, size_t *dim, bool *symbolic);

// Classification report as JSON.
//
// # Safety
// `form` must be a live handle; `out_json` must be writable.
enum TfStatus tf_classify(const struct TfForm *form, char **out_json);

// Congruence decision; the full report goes to `out_json` unless it is NULL.
//
// # Safety
// `a`, `b` must be live handles; `out_congruent` must be writable.
enum TfStatus tf_congruent(const struct TfForm *a,
                           const struct TfForm *b,
                           bool *out_congruent,
                           char **out_json);

// Hyperbolicity; `out_exact` is false when the answer is heuristic.
//
// # Safety
// `form` must be a live handle; the outputs must be writable.
enum TfStatus tf_is_hyperbolic(const struct TfForm *form, bool *out_hyperbolic, bool *out_exact);

// Power-law exponent of the spectral density on `[lambda_min, lambda_max]`.
//
// # Safety
// `form` must be a live handle; `out` must be writable.
enum TfStatus tf_ns_exponent(const struct TfForm *form,
                             double lambda_min,
                             double lambda_max,
                             size_t points,
                             double *out);

// Seeded property suite. `out_passed` is true when every property held;
// the report goes to `out_json` unless it is NULL.
//
// # Safety
// `out_passed` must be writable.
enum TfStatus tf_check(uint64_t seed, enum TfSuite suite, bool *out_passed, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TFORMS_H */
