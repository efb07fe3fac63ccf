#ifndef MELAB_H
#define MELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MelabStatus {
  MELAB_STATUS_OK = 0,
  MELAB_STATUS_NULL_POINTER = 1,
  MELAB_STATUS_INVALID_ARGUMENT = 2,
  MELAB_STATUS_DIVERGED = 3,
  MELAB_STATUS_IO = 4,
  MELAB_STATUS_CONFIG = 5,
  MELAB_STATUS_GRID_MISMATCH = 6,
  MELAB_STATUS_BUFFER_TOO_SMALL = 7,
  MELAB_STATUS_PANIC = 8,
  MELAB_STATUS_FAILURE = 9,
} MelabStatus;

/**
 * Opaque simulation handle.
 */
typedef struct MelabSimulation MelabSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *melab_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). `required` receives the full size including the NUL.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null; `required` may be null.
 */
enum MelabStatus melab_last_error(char *buf, size_t len, size_t *required);

/**
 * Creates a simulation from a JSON experiment config (grid, material,
 * dissipation, forcing, stepper, initial data, seed).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum MelabStatus melab_simulation_new(const char *config_json, struct MelabSimulation **out);

/**
 * # Safety
 * `sim` must come from [`melab_simulation_new`] and not be used afterwards.
 */
void melab_simulation_free(struct MelabSimulation *sim);

/**
 * Advances `steps` steps of the configured size. On divergence the state
 * is left at the last good step.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum MelabStatus melab_simulation_step(struct MelabSimulation *sim, size_t steps);

/**
 * # Safety
 * `sim` must be a live handle and `t` writable.
 */
enum MelabStatus melab_simulation_time(const struct MelabSimulation *sim, double *t);

/**
 * Total energy of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `energy` writable.
 */
enum MelabStatus melab_simulation_energy(const struct MelabSimulation *sim, double *energy);

/**
 * Number of grid nodes, the length of every field buffer.
 *
 * # Safety
 * `sim` must be a live handle and `count` writable.
 */
enum MelabStatus melab_simulation_node_count(const struct MelabSimulation *sim, size_t *count);

/**
 * Copies the magnetic field `h` (node order `j * (nx + 1) + i`).
 *
 * # Safety
 * `sim` must be a live handle; `buf` must be valid for `len` values.
 */
enum MelabStatus melab_simulation_copy_h(const struct MelabSimulation *sim,
                                         double *buf,
                                         size_t len);

/**
 * Copies the displacement (`velocity = 0`) or the velocity (`velocity != 0`).
 *
 * # Safety
 * `sim` must be a live handle; `ux`, `uy` must be valid for `len` values.
 */
enum MelabStatus melab_simulation_copy_u(const struct MelabSimulation *sim,
                                         int velocity,
                                         double *ux,
                                         double *uy,
                                         size_t len);

/**
 * Runs a config file as the command-line runner does. `output_dir` may be
 * null to use the config's directory. `exit_code` receives the runner's
 * exit status (0, 2, 3 or 4).
 *
 * # Safety
 * Strings must be NUL-terminated; `exit_code` must be writable.
 */
enum MelabStatus melab_run_experiment(const char *config_path,
                                      const char *output_dir,
                                      bool strict,
                                      int *exit_code);

/**
 * `m`-th positive zero of `J1`, `1 <= m <= 50`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MelabStatus melab_bessel_j1_zero(uint32_t m, double *out);

/**
 * Critical radius of the ball-invariance argument. `value` is NaN when the
 * denominator is not positive.
 *
 * # Safety
 * `value` and `admissible` must be writable.
 */
enum MelabStatus melab_r_critical(double f_l1_norm,
                                  double alpha,
                                  double nu1,
                                  double period,
                                  double c1,
                                  double c2,
                                  double c3,
                                  double eps,
                                  double *value,
                                  bool *admissible);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MELAB_H */
