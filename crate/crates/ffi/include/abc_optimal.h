#ifndef ABC_OPTIMAL_H
#define ABC_OPTIMAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Relative tolerance on `A*` used by [`abc_proposal_new`] for the optimal scheme.
 */
#define ABC_OPTIMAL_TOL 1e-7

typedef enum AbcStatus {
  ABC_STATUS_OK = 0,
  ABC_STATUS_NULL_POINTER = 1,
  ABC_STATUS_INVALID_ARGUMENT = 2,
  ABC_STATUS_DIVERGENT = 3,
  ABC_STATUS_NUMERICAL_FAILURE = 4,
  ABC_STATUS_INADMISSIBLE = 5,
  ABC_STATUS_NOT_AVAILABLE = 6,
  ABC_STATUS_PANIC = 99,
} AbcStatus;

typedef enum AbcScheme {
  ABC_SCHEME_PRIOR = 0,
  ABC_SCHEME_POSTERIOR = 1,
  ABC_SCHEME_BEAUMONT_KDE = 2,
  ABC_SCHEME_GEOMETRIC_MEAN = 3,
  ABC_SCHEME_BOUNDED = 4,
  ABC_SCHEME_OPTIMAL = 5,
} AbcScheme;

typedef enum AbcAnalyticScheme {
  ABC_ANALYTIC_SCHEME_PRIOR = 0,
  ABC_ANALYTIC_SCHEME_POSTERIOR = 1,
  ABC_ANALYTIC_SCHEME_BEAUMONT_KDE = 2,
  ABC_ANALYTIC_SCHEME_GEOMETRIC_MEAN = 3,
} AbcAnalyticScheme;

/**
 * Opaque one-dimensional density.
 */
typedef struct AbcDensity AbcDensity;

/**
 * Opaque proposal: a density plus the parameters it was built with.
 */
typedef struct AbcProposal AbcProposal;

typedef struct AbcEfficiency {
  double a;
  double b;
  double omega;
  double est_error;
} AbcEfficiency;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *abc_last_error_message(void);

/**
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum AbcStatus abc_density_gaussian(double mean, double std, struct AbcDensity **out);

/**
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum AbcStatus abc_density_uniform(double lo, double hi, struct AbcDensity **out);

/**
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum AbcStatus abc_density_chi_squared(uint32_t dof, struct AbcDensity **out);

/**
 * Gaussian mixture from `n` parallel arrays of weights, means and standard deviations.
 *
 * # Safety
 * Each array must hold `n` doubles; `out` must be valid for one pointer write.
 */
enum AbcStatus abc_density_mixture(const double *weights,
                                   const double *means,
                                   const double *stds,
                                   size_t n,
                                   struct AbcDensity **out);

/**
 * # Safety
 * `density` must come from this library and not be used afterwards. NULL is ignored.
 */
void abc_density_free(struct AbcDensity *density);

/**
 * Natural log of the density at `theta`; `-inf` outside the support.
 *
 * # Safety
 * `density` must be a live handle; `out` must be valid for one write.
 */
enum AbcStatus abc_density_log_pdf(const struct AbcDensity *density, double theta, double *out);

/**
 * `A[q]`, `B[q]` and `ω[q]` by adaptive quadrature.
 *
 * # Safety
 * All handles must be live; `out` must be valid for one write.
 */
enum AbcStatus abc_sampling_efficiency(const struct AbcDensity *q,
                                       const struct AbcDensity *posterior,
                                       const struct AbcDensity *prior,
                                       struct AbcEfficiency *out);

/**
 * Builds the proposal of `scheme` for the given posterior and prior.
 *
 * # Safety
 * Both handles must be live; `out` must be valid for one pointer write.
 */
enum AbcStatus abc_proposal_new(enum AbcScheme scheme,
                                const struct AbcDensity *posterior,
                                const struct AbcDensity *prior,
                                struct AbcProposal **out);

/**
 * # Safety
 * `proposal` must come from this library and not be used afterwards. NULL is ignored.
 */
void abc_proposal_free(struct AbcProposal *proposal);

/**
 * # Safety
 * `proposal` must be a live handle; `out` must be valid for one write.
 */
enum AbcStatus abc_proposal_log_pdf(const struct AbcProposal *proposal, double theta, double *out);

/**
 * A new density handle holding a copy of the proposal density.
 *
 * # Safety
 * `proposal` must be a live handle; `out` must be valid for one pointer write.
 */
enum AbcStatus abc_proposal_density(const struct AbcProposal *proposal, struct AbcDensity **out);

/**
 * `A*` of the optimal scheme or `Ā` of the bounded scheme; `NotAvailable` otherwise.
 *
 * # Safety
 * `proposal` must be a live handle; `out` must be valid for one write.
 */
enum AbcStatus abc_proposal_acceptance_parameter(const struct AbcProposal *proposal, double *out);

/**
 * Kish effective sample size `(Σw)² / Σw²` of `n` nonnegative weights.
 *
 * # Safety
 * `weights` must hold `n` doubles; `out` must be valid for one write.
 */
enum AbcStatus abc_kish_ess(const double *weights, size_t n, double *out);

/**
 * Closed-form efficiency for the isotropic Gaussian toy with posterior
 * `N(0, I)` and prior `N(mu_pi, sigma_pi² I)` in `n_theta` dimensions.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum AbcStatus abc_analytic_gaussian_efficiency(uint32_t n_theta,
                                                double mu_pi,
                                                double sigma_pi,
                                                enum AbcAnalyticScheme scheme,
                                                struct AbcEfficiency *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ABC_OPTIMAL_H */
