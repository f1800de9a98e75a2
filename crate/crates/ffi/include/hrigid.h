#ifndef HRIGID_H
#define HRIGID_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HrStatus {
  HR_STATUS_OK = 0,
  HR_STATUS_NULL_POINTER = 1,
  HR_STATUS_INVALID_ARGUMENT = 2,
  HR_STATUS_PARSE_ERROR = 3,
  HR_STATUS_DOMAIN_ERROR = 4,
  HR_STATUS_COMPUTATION_FAILED = 5,
  HR_STATUS_PANIC = 6,
} HrStatus;

typedef enum HrCase {
  HR_CASE_A = 0,
  HR_CASE_B = 1,
  HR_CASE_C = 2,
  HR_CASE_D = 3,
  HR_CASE_INDETERMINATE = 4,
} HrCase;

/**
 * Opaque sampled direction set.
 */
typedef struct HrDirectionSet HrDirectionSet;

/**
 * Opaque scalar field.
 */
typedef struct HrField HrField;

typedef struct HrRotationResult {
  double alpha;
  double w;
  double max_error;
} HrRotationResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hr_last_error_message(void);

/**
 * Parses `source` as a field of `arity` variables (1 or 2).
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HrStatus hr_field_parse(const char *source, int arity, struct HrField **out);

/**
 * # Safety
 * `field` must come from `hr_field_parse` and not be used afterwards.
 */
void hr_field_free(struct HrField *field);

/**
 * # Safety
 * `field` must be a live handle and `out` a valid pointer.
 */
enum HrStatus hr_field_eval(const struct HrField *field, double x, double y, double *out);

/**
 * ψ_c of the unit vector `v` (normalized first).
 *
 * # Safety
 * `v` and `out` must point to 3 doubles each.
 */
enum HrStatus hr_psi(double c, const double *v, double *out);

/**
 * Samples the chord directions of the graph of `field` over the box.
 *
 * # Safety
 * `field` must be a live handle and `out` a valid pointer.
 */
enum HrStatus hr_direction_set_sample(const struct HrField *field,
                                      double x0,
                                      double x1,
                                      double y0,
                                      double y1,
                                      size_t n,
                                      uint64_t seed,
                                      struct HrDirectionSet **out);

/**
 * Number of stored samples (antipodes included); 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t hr_direction_set_len(const struct HrDirectionSet *ds);

/**
 * # Safety
 * `ds` must be a live handle and `out` point to 3 doubles.
 */
enum HrStatus hr_direction_set_get(const struct HrDirectionSet *ds, size_t index, double *out);

/**
 * # Safety
 * `ds` must come from `hr_direction_set_sample` and not be used afterwards.
 */
void hr_direction_set_free(struct HrDirectionSet *ds);

/**
 * Classifies the arc profile with `bins` azimuth bins and default
 * tolerances.
 *
 * # Safety
 * `ds` must be a live handle and `out` a valid pointer.
 */
enum HrStatus hr_direction_set_classify(const struct HrDirectionSet *ds,
                                        size_t bins,
                                        enum HrCase *out);

/**
 * Classifies the solution family of a system given as JSON
 * (`{"g", "grid", "entries"}`); writes the verdict JSON to `out_json`.
 *
 * # Safety
 * `system_json` must be NUL-terminated and `out_json` a valid pointer.
 */
enum HrStatus hr_funceq_classify_json(const char *system_json, char **out_json);

/**
 * Rotated cross-section check for `g(x) + d·y` on `[lo, hi]`.
 *
 * # Safety
 * `g` must be a live one-variable handle and `out` a valid pointer.
 */
enum HrStatus hr_rotation_check(const struct HrField *g,
                                double d,
                                double c,
                                double lo,
                                double hi,
                                double fiber_step,
                                struct HrRotationResult *out);

/**
 * Runs the rigidity pipeline; `config_json` may be null for defaults or a
 * full configuration object. Writes the report JSON to `out_json`.
 *
 * # Safety
 * `field` must be a live handle, `scales` point to `n_scales` doubles,
 * `config_json` be null or NUL-terminated, and `out_json` valid.
 */
enum HrStatus hr_rigidity_json(const struct HrField *field,
                               const double *scales,
                               size_t n_scales,
                               const char *config_json,
                               char **out_json);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HRIGID_H */
