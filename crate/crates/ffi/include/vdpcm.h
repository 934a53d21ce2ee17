#ifndef VDPCM_H
#define VDPCM_H

/* Generated by cbindgen from the vdpcm-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define VDPCM_OK 0

#define VDPCM_ERR_NULL 1

/**
 * Bad configuration, parameter or argument.
 */
#define VDPCM_ERR_INVALID 2

#define VDPCM_ERR_SIMULATION 3

/**
 * Energy increase or broken state invariant.
 */
#define VDPCM_ERR_VIOLATION 4

#define VDPCM_ERR_BUFFER 5

#define VDPCM_ERR_PANIC 6

#define VDPCM_FIELD_U1 0

#define VDPCM_FIELD_U2 1

#define VDPCM_FIELD_U0 2

#define VDPCM_FIELD_V0 3

#define VDPCM_FIELD_V1 4

#define VDPCM_FIELD_V2 5

/**
 * Opaque simulation handle.
 */
typedef struct VdpcmSimulation VdpcmSimulation;

/**
 * Energy ledger summary at the current time.
 */
typedef struct VdpcmEnergy {
  double phi;
  double psi;
  double psi_tot;
  /**
   * Largest per-step increase of `psi_tot` so far (negative when it always decreased).
   */
  double max_increase;
  double max_balance_residual;
} VdpcmEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulation from a TOML configuration, or from the shipped
 * defaults when `config_toml` is null.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be valid
 * for a pointer write.
 */
int32_t vdpcm_simulation_new(const char *config_toml, struct VdpcmSimulation **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from `vdpcm_simulation_new` not yet freed.
 */
void vdpcm_simulation_free(struct VdpcmSimulation *sim);

/**
 * Integrates to `t_end`. On failure the handle keeps the last accepted state.
 *
 * # Safety
 * `sim` must be a live handle.
 */
int32_t vdpcm_simulation_advance(struct VdpcmSimulation *sim, double t_end);

/**
 * # Safety
 * `sim` must be a live handle and `t` valid for writing.
 */
int32_t vdpcm_simulation_time(const struct VdpcmSimulation *sim, double *t);

/**
 * # Safety
 * `sim` must be a live handle and `n` valid for writing.
 */
int32_t vdpcm_simulation_n_cells(const struct VdpcmSimulation *sim, size_t *n);

/**
 * # Safety
 * `sim` must be a live handle and `steps` valid for writing.
 */
int32_t vdpcm_simulation_steps(const struct VdpcmSimulation *sim, size_t *steps);

/**
 * Copies one cell field (`VDPCM_FIELD_*`) into `buf`, which must hold at
 * least `n_cells` values.
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` writes.
 */
int32_t vdpcm_simulation_copy_field(const struct VdpcmSimulation *sim,
                                    int32_t field,
                                    double *buf,
                                    size_t len);

/**
 * # Safety
 * `sim` must be a live handle and `out` valid for writing.
 */
int32_t vdpcm_simulation_energy(const struct VdpcmSimulation *sim, struct VdpcmEnergy *out);

/**
 * Spatial mean of the total current over interior edges.
 *
 * # Safety
 * `sim` must be a live handle and `current` valid for writing.
 */
int32_t vdpcm_simulation_total_current(const struct VdpcmSimulation *sim, double *current);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length without the NUL,
 * 0 when there is none. A null `buf` only queries the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t vdpcm_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vdpcm_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VDPCM_H */
