#ifndef VLASOV_DECAY_H
#define VLASOV_DECAY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Equilibrium families.
 */
typedef enum VdFamily {
  VD_FAMILY_MAXWELLIAN = 0,
  /**
   * Equal-weight Maxwellians at `±u·e₁`.
   */
  VD_FAMILY_DOUBLE_BUMP = 1,
} VdFamily;

/**
 * Result codes.
 */
typedef enum VdStatus {
  VD_STATUS_OK = 0,
  VD_STATUS_NULL_POINTER = 1,
  VD_STATUS_PARAMETER = 2,
  VD_STATUS_DOMAIN = 3,
  VD_STATUS_CAPABILITY = 4,
  VD_STATUS_PRECISION = 5,
  VD_STATUS_RANGE = 6,
  VD_STATUS_UNSTABLE_MODE = 7,
  VD_STATUS_DIVERGENCE = 8,
  VD_STATUS_INVERTIBILITY = 9,
  VD_STATUS_INSTABILITY = 10,
  VD_STATUS_CONFIGURATION = 11,
  VD_STATUS_DIMENSION = 12,
  VD_STATUS_BUFFER_TOO_SMALL = 13,
  VD_STATUS_PANIC = 14,
} VdStatus;

/**
 * Opaque equilibrium handle.
 */
typedef struct VdEquilibrium VdEquilibrium;

/**
 * Opaque per-mode resolvent table.
 */
typedef struct VdResolvent VdResolvent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *vd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vd_version(void);

/**
 * Creates an equilibrium; `u` is ignored for the Maxwellian.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum VdStatus vd_equilibrium_new(enum VdFamily family,
                                 size_t dim,
                                 double sigma,
                                 double u,
                                 struct VdEquilibrium **out);

/**
 * Releases an equilibrium; null is ignored.
 *
 * # Safety
 * `eq` must come from [`vd_equilibrium_new`] and not be used afterwards.
 */
void vd_equilibrium_free(struct VdEquilibrium *eq);

/**
 * `μ(v)` for `v` of length `d`.
 *
 * # Safety
 * `eq` must be a live handle, `v` must hold `len` doubles and `out` must
 * be writable.
 */
enum VdStatus vd_equilibrium_value(const struct VdEquilibrium *eq,
                                   const double *v,
                                   size_t len,
                                   double *out);

/**
 * `K̃(τ, ξ)` with `Im τ ≤ 0`, written as real and imaginary parts.
 *
 * # Safety
 * `eq` must be a live handle, `xi` must hold `len` doubles and the
 * outputs must be writable.
 */
enum VdStatus vd_dispersion_transform(const struct VdEquilibrium *eq,
                                      double tau_re,
                                      double tau_im,
                                      const double *xi,
                                      size_t len,
                                      double *out_re,
                                      double *out_im);

/**
 * Penrose margin on the default grid; `out_stable` is 1 when the margin is
 * positive and every winding count vanishes.
 *
 * # Safety
 * `eq` must be a live handle and the outputs must be writable.
 */
enum VdStatus vd_penrose_margin(const struct VdEquilibrium *eq,
                                double *out_margin,
                                int32_t *out_stable);

/**
 * Resolvent `G(t, r·e₁)` on `t = n·dt ≤ horizon` for the given radii.
 *
 * # Safety
 * `eq` must be a live handle, `radii` must hold `n_radii` doubles and
 * `out` must be writable.
 */
enum VdStatus vd_resolvent_new(const struct VdEquilibrium *eq,
                               const double *radii,
                               size_t n_radii,
                               double dt,
                               double horizon,
                               struct VdResolvent **out);

/**
 * Releases a resolvent table; null is ignored.
 *
 * # Safety
 * `res` must come from [`vd_resolvent_new`] and not be used afterwards.
 */
void vd_resolvent_free(struct VdResolvent *res);

/**
 * Number of time steps and of modes.
 *
 * # Safety
 * `res` must be a live handle and the outputs must be writable.
 */
enum VdStatus vd_resolvent_shape(const struct VdResolvent *res,
                                 size_t *out_steps,
                                 size_t *out_modes);

/**
 * `G(t_step, mode)` and `K(t_step, mode)`.
 *
 * # Safety
 * `res` must be a live handle and the outputs must be writable.
 */
enum VdStatus vd_resolvent_get(const struct VdResolvent *res,
                               size_t step,
                               size_t mode,
                               double *out_g,
                               double *out_k);

/**
 * `(‖∇ᵏρ_free(t)‖_{L¹}, ‖∇ᵏρ_free(t)‖_{L^∞})` for `k ≤ order` of the
 * Gaussian datum with smallness `eps0`. Both buffers need `order + 1`
 * entries.
 *
 * # Safety
 * The output buffers must hold `capacity` doubles each.
 */
enum VdStatus vd_free_transport_norms(size_t dim,
                                      double eps0,
                                      size_t order,
                                      double t,
                                      double *out_l1,
                                      double *out_linf,
                                      size_t capacity);

/**
 * Least-squares decay exponent of `values` against `t` over the window.
 *
 * # Safety
 * `t` and `values` must hold `len` doubles; outputs must be writable.
 */
enum VdStatus vd_fit_decay(const double *t,
                           const double *values,
                           size_t len,
                           double t_min,
                           double t_max,
                           int32_t log_correction,
                           double *out_exponent,
                           double *out_amplitude,
                           double *out_residual);

/**
 * Parses `config_text` and runs the experiment, writing CSV files and the
 * manifest into `out_dir` (or the config's `output` when null).
 *
 * # Safety
 * `config_text` and a non-null `out_dir` must be NUL-terminated UTF-8.
 */
enum VdStatus vd_run_config(const char *config_text, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VLASOV_DECAY_H */
