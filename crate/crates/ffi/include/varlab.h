#ifndef VARLAB_H
#define VARLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Result codes shared by every entry point.
typedef enum VarlabStatus {
  VARLAB_STATUS_OK = 0,
  VARLAB_STATUS_NULL_POINTER = 1,
  VARLAB_STATUS_INVALID_ARGUMENT = 2,
  VARLAB_STATUS_CONFIG_ERROR = 3,
  VARLAB_STATUS_INVARIANT_VIOLATED = 4,
  VARLAB_STATUS_IO_ERROR = 5,
  VARLAB_STATUS_PANIC = 6,
} VarlabStatus;

// Kernel selector for the averaging operators.
typedef enum VarlabKernel {
  VARLAB_KERNEL_BALL = 0,
  VARLAB_KERNEL_CUBE = 1,
} VarlabKernel;

// Opaque handle to a scalar field on a periodic lattice.
typedef struct VarlabField VarlabField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *varlab_version(void);

// Message for the last failed call on this thread, or null.
//
// The pointer stays valid until the next varlab call on the same thread.
const char *varlab_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from a varlab out-pointer and must not be used afterwards.
void varlab_string_free(char *s);

// Creates a field on the `2^log_side` torus in dimension `dim` from `len`
// values in row-major order (`x0 + side * x1`).
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum VarlabStatus varlab_field_new(size_t dim,
                                   uint32_t log_side,
                                   const double *values,
                                   size_t len,
                                   struct VarlabField **out);

// Releases a field handle. Null is ignored.
//
// # Safety
// `f` must come from this library and must not be used afterwards.
void varlab_field_free(struct VarlabField *f);

// Number of lattice points, or 0 for a null handle.
//
// # Safety
// `f` must be null or a live handle.
size_t varlab_field_len(const struct VarlabField *f);

// Copies the field values into `out`, which must hold exactly the field length.
//
// # Safety
// `f` must be a live handle and `out` must point to `len` writable doubles.
enum VarlabStatus varlab_field_values(const struct VarlabField *f, double *out, size_t len);

// Dyadic conditional expectation onto level-`level` cubes.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum VarlabStatus varlab_cond_expect(const struct VarlabField *f,
                                     uint32_t level,
                                     struct VarlabField **out);

// Smoothed square function over the scales `2^k (1 + m/refinement)`,
// `k_min <= k <= k_max`.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum VarlabStatus varlab_square_function(const struct VarlabField *f,
                                         uint32_t k_min,
                                         uint32_t k_max,
                                         uint32_t refinement,
                                         enum VarlabKernel kernel,
                                         struct VarlabField **out);

// Exact homogeneous `r`-variation of a scalar path of `len` samples.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum VarlabStatus varlab_hvar(const double *values, size_t len, double r, double *out);

// Largest number of successive increments exceeding `lambda`.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum VarlabStatus varlab_jump_count(const double *values, size_t len, double lambda, size_t *out);

// Runs an experiment from a JSON config and returns the report as JSON.
//
// With `write_files` set, the three report files are also written to the
// configured output directory. An invariant violation still produces a
// report and returns `VARLAB_STATUS_INVARIANT_VIOLATED`.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out_report` must be
// writable and receives a string to release with [`varlab_string_free`].
enum VarlabStatus varlab_run_experiment(const char *config_json,
                                        bool write_files,
                                        char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARLAB_H */
