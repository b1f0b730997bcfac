/* C interface to the sqg simulation and analysis library. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status code returned by every library call.
 */
typedef enum SqgStatus {
  /*
   The call succeeded.
   */
  SQG_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  SQG_STATUS_NULL_POINTER = 1,
  /*
   An argument was outside its documented domain.
   */
  SQG_STATUS_INVALID_ARGUMENT = 2,
  /*
   The computation could not meet its accuracy or stability contract.
   */
  SQG_STATUS_NUMERICS_FAILURE = 3,
  /*
   A file could not be read, written, or parsed.
   */
  SQG_STATUS_IO_FAILURE = 4,
  /*
   A caller-supplied buffer was too small.
   */
  SQG_STATUS_BUFFER_TOO_SMALL = 5,
  /*
   An internal invariant failed; this is a bug in the library.
   */
  SQG_STATUS_INTERNAL_PANIC = 6,
} SqgStatus;

/*
 Real scalar field sampled on a grid handle.
 */
typedef struct SqgField SqgField;

/*
 Periodic grid handle: `n x n` points on a square box.
 */
typedef struct SqgGrid SqgGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Returns the library version as a static NUL-terminated string.
 */
const char *sqg_version(void);

/*
 Copies the most recent error message for this thread into `buf`.

 Returns the full length of the message including the trailing NUL. When
 `buf` is null or `cap` is zero, nothing is copied and the required
 length is returned; 1 means the slot is empty. The copy is truncated to
 `cap - 1` characters and always NUL-terminated.
 */
size_t sqg_last_error(char *buf, size_t cap);

/*
 Creates a periodic grid with `n x n` points (`n` a power of two, at
 least 16) on a square box of side `box_length`.
 */
enum SqgStatus sqg_grid_new(size_t n, double box_length, struct SqgGrid **out);

/*
 Releases a grid handle. Null is accepted and ignored.
 */
void sqg_grid_free(struct SqgGrid *grid);

/*
 Writes the per-side point count of `grid` to `out_n`.
 */
enum SqgStatus sqg_grid_size(const struct SqgGrid *grid, size_t *out_n);

/*
 Samples a rotated anisotropic Gaussian bump on `grid`.

 `center_*` place the bump, `sigma_*` are the principal widths (both
 positive), `angle` rotates the principal axes in radians.
 */
enum SqgStatus sqg_field_gaussian(const struct SqgGrid *grid,
                                  double center_x,
                                  double center_y,
                                  double sigma_x,
                                  double sigma_y,
                                  double angle,
                                  struct SqgField **out);

/*
 Releases a field handle. Null is accepted and ignored.
 */
void sqg_field_free(struct SqgField *field);

/*
 Writes the per-side point count of the field's grid to `out_n`; the
 flattened sample count is its square.
 */
enum SqgStatus sqg_field_size(const struct SqgField *field, size_t *out_n);

/*
 Copies the field samples, row-major, into `buf` (capacity `cap`
 doubles). Fails with `SQG_STATUS_BUFFER_TOO_SMALL` when `cap` is less
 than the flattened sample count.
 */
enum SqgStatus sqg_field_values(const struct SqgField *field, double *buf, size_t cap);

/*
 Writes the L^p norm of the field to `out_value`. `p` must be at least 1;
 pass INFINITY for the sup norm.
 */
enum SqgStatus sqg_field_lp_norm(const struct SqgField *field, double p, double *out_value);

/*
 Writes the field to `path` in the library's text snapshot format,
 stamping it with time `t` and dissipation order `alpha`.
 */
enum SqgStatus sqg_field_dump(const struct SqgField *field,
                              double t,
                              double alpha,
                              const char *path);

/*
 Loads a field snapshot from `path`. On success writes a new handle to
 `out` and the stamped time and dissipation order to `out_t` /
 `out_alpha` (each may be null when the caller does not need it).
 */
enum SqgStatus sqg_field_load(const char *path,
                              struct SqgField **out,
                              double *out_t,
                              double *out_alpha);

/*
 Evaluates the dissipation kernel of order `alpha` at time `t > 0` on
 `grid` and returns it as a new field handle.
 */
enum SqgStatus sqg_heat_kernel(const struct SqgGrid *grid,
                               double t,
                               double alpha,
                               struct SqgField **out);

/*
 Advances `initial` under the dissipative transport dynamics of order
 `alpha` to time `t > 0` (step size chosen automatically) and returns
 the evolved field as a new handle.
 */
enum SqgStatus sqg_evolve(const struct SqgField *initial,
                          double alpha,
                          double t,
                          struct SqgField **out);

/*
 Writes the L^2 norm of the leading nonlinear correction of the
 large-time expansion, evaluated at time `t > 1`, to `out_value`.
 `quad_nodes` Gauss points are used per integration panel (8 to 64;
 16 is a sound default for smooth data).
 */
enum SqgStatus sqg_correction_norm(const struct SqgField *initial,
                                   double alpha,
                                   double t,
                                   size_t quad_nodes,
                                   double *out_value);

/*
 Runs a full experiment described by a JSON configuration string (the
 same schema the `sqg` command-line tool accepts), writing report
 artifacts as configured. On success, stores a NUL-terminated JSON run
 record in `*out_record`; release it with `sqg_string_free`.

 Note: a completed run whose criteria fail still returns
 `SQG_STATUS_OK`; inspect the `all_passed` element of the record.
 */
enum SqgStatus sqg_experiment_run_json(const char *config_json, char **out_record);

/*
 Releases a string returned by this library. Null is accepted and
 ignored.
 */
void sqg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
