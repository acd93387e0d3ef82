#ifndef IQCKIT_H
#define IQCKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every C entry point.
typedef enum IqcStatus {
  // Success.
  IqcOk = 0,
  // A required pointer argument was null.
  IqcNullArgument = 1,
  // A string argument was not valid UTF-8.
  IqcInvalidUtf8 = 2,
  // JSON parsing or schema validation failed.
  IqcParseError = 3,
  // Arguments were structurally invalid (dimensions, parameters).
  IqcInvalidArgument = 4,
  // A precondition on system stability was violated.
  IqcUnstable = 5,
  // The computation failed numerically.
  IqcNumericalError = 6,
  // The requested construction does not apply (e.g. the plant already
  // satisfies the constraint).
  IqcNothingToDo = 7,
} IqcStatus;

// Opaque LTI system handle.
typedef struct IqcSystem IqcSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message of this thread, or null when none was recorded.
// Release with [`iqc_string_free`].
char *iqc_last_error_message(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must have been returned by an iqckit function and not freed before.
void iqc_string_free(char *s);

// Parses a system from its JSON description into an opaque handle.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum IqcStatus iqc_system_from_json(const char *json, struct IqcSystem **out);

// Releases a system handle.
//
// # Safety
// `sys` must come from [`iqc_system_from_json`] and not be freed twice.
void iqc_system_free(struct IqcSystem *sys);

// Serializes a system back to JSON. Release with [`iqc_string_free`].
//
// # Safety
// `sys` must be a live handle.
char *iqc_system_to_json(const struct IqcSystem *sys);

// State dimension, or -1 on a null handle.
//
// # Safety
// `sys` must be a live handle or null.
int iqc_system_order(const struct IqcSystem *sys);

// Output count, or -1 on a null handle.
//
// # Safety
// `sys` must be a live handle or null.
int iqc_system_outputs(const struct IqcSystem *sys);

// Input count, or -1 on a null handle.
//
// # Safety
// `sys` must be a live handle or null.
int iqc_system_inputs(const struct IqcSystem *sys);

// Stability of the system: writes the eigenvalue margin and returns 1
// (stable), 0 (unstable) or -1 (error).
//
// # Safety
// `sys` must be a live handle; `out_margin` may be null.
int iqc_system_is_stable(const struct IqcSystem *sys, double *out_margin);

// Transfer matrix at `lambda = re + j im`, written row-major into the
// `outputs x inputs` buffers `out_re` and `out_im`.
//
// # Safety
// Buffers must hold at least `outputs * inputs` doubles each.
enum IqcStatus iqc_system_evaluate(const struct IqcSystem *sys,
                                   double re,
                                   double im,
                                   double *out_re,
                                   double *out_im);

// H-infinity norm over a default grid with `points` interior points
// (0 selects the default density).
//
// # Safety
// `sys` must be a live handle; output pointers may be null.
enum IqcStatus iqc_hinf_norm(const struct IqcSystem *sys,
                             size_t points,
                             double *out_gamma,
                             double *out_peak_frequency);

// Passivity report as JSON. Release with [`iqc_string_free`]; null on error.
//
// # Safety
// `sys` must be a live handle.
char *iqc_passivity_report_json(const struct IqcSystem *sys, size_t points);

// Membership of a system in one of the four IQC sets. `set` is one of
// `g1_strict`, `g1_nonstrict`, `g2_strict`, `g2_nonstrict`. Writes 1 or 0
// into `out_holds` and the signed margin into `out_margin`.
//
// # Safety
// Pointers must be live; strings NUL-terminated.
enum IqcStatus iqc_membership(const struct IqcSystem *sys,
                              const char *multiplier_json,
                              const char *set,
                              size_t points,
                              int *out_holds,
                              double *out_margin);

// Runs the destabilizer synthesis and returns the certificate as JSON.
// `profile` is `t1` or `t3`. Null on failure. Release with
// [`iqc_string_free`].
//
// # Safety
// Pointers must be live; strings NUL-terminated.
char *iqc_destabilize_json(const struct IqcSystem *g1,
                           const char *multiplier_json,
                           const char *profile,
                           size_t points);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IQCKIT_H */
