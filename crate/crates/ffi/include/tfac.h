/* C ABI of the tfac time-fractional Allen-Cahn solver. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum TfacStatus {
  TFAC_STATUS_OK = 0,
  TFAC_STATUS_NULL_POINTER = 1,
  TFAC_STATUS_INVALID_ARGUMENT = 2,
  TFAC_STATUS_TOLERANCE_UNACHIEVABLE = 3,
  TFAC_STATUS_PICARD_DIVERGED = 4,
  TFAC_STATUS_ASSERTION_FAILED = 5,
  TFAC_STATUS_NUMERICAL_ERROR = 6,
  TFAC_STATUS_PANIC = 7,
} TfacStatus;

/**
 * Opaque nonuniform time mesh.
 */
typedef struct TfacMesh TfacMesh;

/**
 * Opaque finished run: per-level diagnostics plus the final field.
 */
typedef struct TfacRun TfacRun;

/**
 * Opaque SOE approximation of `omega_{1-alpha}` on `[dt, T]`.
 */
typedef struct TfacSoe TfacSoe;

/**
 * One per-level diagnostics record.
 */
typedef struct TfacRecord {
  uintptr_t level;
  double t;
  double tau;
  double unorm;
  double energy;
  uintptr_t iters;
  double change_inf;
} TfacRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to `cap`); returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null to query the length.
 */
uintptr_t tfac_last_error(char *buf, uintptr_t cap);

/**
 * Graded mesh `t_k = T0 (k/N0)^gamma`.
 *
 * # Safety
 * `out` must be a valid pointer; the result must be released with
 * [`tfac_mesh_free`].
 */
enum TfacStatus tfac_mesh_graded(double t0, uintptr_t n0, double gamma, struct TfacMesh **out);

/**
 * Graded head on `[0, T0]` plus a seeded random tail filling `[T0, T]`.
 *
 * # Safety
 * `out` must be a valid pointer; the result must be released with
 * [`tfac_mesh_free`].
 */
enum TfacStatus tfac_mesh_graded_random(double t0,
                                        double t_final,
                                        uintptr_t n0,
                                        uintptr_t n1,
                                        double gamma,
                                        uint64_t seed,
                                        struct TfacMesh **out);

/**
 * Number of steps N.
 *
 * # Safety
 * `mesh` and `out` must be valid pointers.
 */
enum TfacStatus tfac_mesh_n_steps(const struct TfacMesh *mesh, uintptr_t *out);

/**
 * Node `t_k` for `0 <= k <= N`.
 *
 * # Safety
 * `mesh` and `out` must be valid pointers.
 */
enum TfacStatus tfac_mesh_node(const struct TfacMesh *mesh, uintptr_t k, double *out);

/**
 * # Safety
 * `mesh` must come from a `tfac_mesh_*` constructor and not be freed twice.
 */
void tfac_mesh_free(struct TfacMesh *mesh);

/**
 * Builds the kernel compression; certified against the requested absolute
 * tolerance at construction.
 *
 * # Safety
 * `out` must be a valid pointer; release with [`tfac_soe_free`].
 */
enum TfacStatus tfac_soe_build(double alpha,
                               double eps,
                               double dt,
                               double t_final,
                               struct TfacSoe **out);

/**
 * # Safety
 * `soe` and `out` must be valid pointers.
 */
enum TfacStatus tfac_soe_n_modes(const struct TfacSoe *soe, uintptr_t *out);

/**
 * Max deviation achieved on the construction scan grid.
 *
 * # Safety
 * `soe` and `out` must be valid pointers.
 */
enum TfacStatus tfac_soe_max_deviation(const struct TfacSoe *soe, double *out);

/**
 * Copies the exponents and weights into caller buffers of length `len`
 * (which must equal the mode count).
 *
 * # Safety
 * `thetas` and `weights` must point to `len` writable doubles.
 */
enum TfacStatus tfac_soe_modes(const struct TfacSoe *soe,
                               double *thetas,
                               double *weights,
                               uintptr_t len);

/**
 * Re-certifies the deviation on an `npoints` log grid (extended-precision
 * scan) and writes the measured maximum.
 *
 * # Safety
 * `soe` and `out` must be valid pointers.
 */
enum TfacStatus tfac_soe_certify(const struct TfacSoe *soe, uintptr_t npoints, double *out);

/**
 * # Safety
 * `soe` must come from [`tfac_soe_build`] and not be freed twice.
 */
void tfac_soe_free(struct TfacSoe *soe);

/**
 * Parses the `key = value` run-config text (same format as the CLI), applies
 * it over the named experiment preset, marches the problem and returns the
 * finished run.
 *
 * # Safety
 * `config_text` and `preset` must be NUL-terminated strings; `out` must be a
 * valid pointer; release with [`tfac_run_free`].
 */
enum TfacStatus tfac_run_config(const char *config_text, const char *preset, struct TfacRun **out);

/**
 * # Safety
 * `run` and `out` must be valid pointers.
 */
enum TfacStatus tfac_run_n_records(const struct TfacRun *run, uintptr_t *out);

/**
 * # Safety
 * `run` and `out` must be valid pointers.
 */
enum TfacStatus tfac_run_record(const struct TfacRun *run, uintptr_t index, struct TfacRecord *out);

/**
 * Grid extents of the final field.
 *
 * # Safety
 * All pointers must be valid.
 */
enum TfacStatus tfac_run_field_dims(const struct TfacRun *run, uintptr_t *m1, uintptr_t *m2);

/**
 * Copies the final field (row-major, j outer) into a caller buffer of length
 * `len = M1 * M2`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum TfacStatus tfac_run_field(const struct TfacRun *run, double *buf, uintptr_t len);

/**
 * # Safety
 * `run` must come from [`tfac_run_config`] and not be freed twice.
 */
void tfac_run_free(struct TfacRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
