#ifndef IRF_MIXFLOW_H
#define IRF_MIXFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrfStatus {
  IRF_STATUS_OK = 0,
  IRF_STATUS_NULL_POINTER = 1,
  IRF_STATUS_INVALID_ARGUMENT = 2,
  IRF_STATUS_CONFIG = 3,
  IRF_STATUS_NUMERICAL = 4,
  IRF_STATUS_PANIC = 5,
} IrfStatus;

typedef struct IrfFlow IrfFlow;

typedef struct IrfKernel IrfKernel;

typedef struct IrfTarget IrfTarget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *irf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *irf_version(void);

/**
 * Looks up a synthetic target: `banana`, `funnel`, `cross`, `warped` or
 * `gaussian`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum IrfStatus irf_target_new(const char *name, struct IrfTarget **out);

/**
 * # Safety
 * `t` must come from [`irf_target_new`] and not be used afterwards.
 */
void irf_target_free(struct IrfTarget *t);

/**
 * # Safety
 * `t` must be a live target handle.
 */
size_t irf_target_dim(const struct IrfTarget *t);

/**
 * `ln γ(x)` for `x` of length `d`.
 *
 * # Safety
 * `t` must be a live target handle, `x` readable for `d` values and `out`
 * writable.
 */
enum IrfStatus irf_target_log_density(const struct IrfTarget *t,
                                      const double *x,
                                      size_t d,
                                      double *out);

/**
 * Builds `rwmh`, `mala` or `hmc` on a target; `leapfrog` is read by `hmc`
 * only. The kernel keeps its own reference to the target.
 *
 * # Safety
 * `t` must be a live target handle, `kind` NUL-terminated and `out`
 * writable.
 */
enum IrfStatus irf_kernel_new(const struct IrfTarget *t,
                              const char *kind,
                              double eps,
                              size_t leapfrog,
                              struct IrfKernel **out);

/**
 * # Safety
 * `k` must come from [`irf_kernel_new`] and not be used afterwards.
 */
void irf_kernel_free(struct IrfKernel *k);

/**
 * Length of a flat augmented state, `3d + 1`.
 *
 * # Safety
 * `k` must be a live kernel handle.
 */
size_t irf_state_len(const struct IrfKernel *k);

/**
 * One IRF step `f_θ(s)`. `out` may alias `state`.
 *
 * # Safety
 * `k` must be a live kernel handle; `state` and `out` must hold `len`
 * values and `theta_v` must hold `d`.
 */
enum IrfStatus irf_forward_step(const struct IrfKernel *k,
                                const double *state,
                                size_t len,
                                const double *theta_v,
                                double theta_a,
                                double *out);

/**
 * The exact inverse `f_θ⁻¹(s)`. `out` may alias `state`.
 *
 * # Safety
 * As for [`irf_forward_step`].
 */
enum IrfStatus irf_inverse_step(const struct IrfKernel *k,
                                const double *state,
                                size_t len,
                                const double *theta_v,
                                double theta_a,
                                double *out);

/**
 * A flow of `family` (`homogeneous`, `irf`, `backward_irf`,
 * `ensemble_irf`, `uncorrected_homogeneous`) over the mean-field Gaussian
 * reference `N(mean, diag(exp(2 log_sd)))`. Homogeneous families use the
 * default constant shift; the IRF families draw their frozen stream from
 * `seed`.
 *
 * # Safety
 * `k` must be a live kernel handle, `family` NUL-terminated, `mean` and
 * `log_sd` readable for `d` values, and `out` writable.
 */
enum IrfStatus irf_flow_new(const struct IrfKernel *k,
                            const char *family,
                            size_t length,
                            size_t streams,
                            uint64_t seed,
                            const double *mean,
                            const double *log_sd,
                            struct IrfFlow **out);

/**
 * # Safety
 * `f` must come from [`irf_flow_new`] and not be used afterwards.
 */
void irf_flow_free(struct IrfFlow *f);

/**
 * `n` draws written row-major into `out` (`n · (3d + 1)` values). Draw `i`
 * depends only on `seed` and `i`. Fails as a whole if any draw fails.
 *
 * # Safety
 * `f` must be a live flow handle and `out` writable for `n · (3d + 1)`
 * values.
 */
enum IrfStatus irf_flow_sample(const struct IrfFlow *f, size_t n, uint64_t seed, double *out);

/**
 * `ln q̄_T(s)` of a flat state.
 *
 * # Safety
 * `f` must be a live flow handle, `state` readable for `len` values and
 * `out` writable.
 */
enum IrfStatus irf_flow_log_density(const struct IrfFlow *f,
                                    const double *state,
                                    size_t len,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IRF_MIXFLOW_H */
