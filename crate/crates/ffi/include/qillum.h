#ifndef QILLUM_H
#define QILLUM_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Photon addition (`QI_SIGN_PLUS`) or subtraction (`QI_SIGN_MINUS`).
#define QI_SIGN_PLUS 0

#define QI_SIGN_MINUS 1

// Result code of every fallible call.
typedef enum QiStatus {
  QI_STATUS_OK = 0,
  QI_STATUS_NULL_POINTER = 1,
  QI_STATUS_INVALID_DIMENSION = 2,
  QI_STATUS_TRUNCATION_TOO_SMALL = 3,
  QI_STATUS_LABEL_COLLISION = 4,
  QI_STATUS_LABEL_NOT_FOUND = 5,
  QI_STATUS_DOMAIN = 6,
  QI_STATUS_CONVERGENCE = 7,
  QI_STATUS_ARGUMENT_ORDER = 8,
  QI_STATUS_DEGENERATE_MEASUREMENT = 9,
  QI_STATUS_SUPPORT_MISMATCH = 10,
  QI_STATUS_INVALID_BASIS = 11,
  QI_STATUS_HIERARCHY_VIOLATION = 12,
  QI_STATUS_BUFFER_TOO_SMALL = 13,
  QI_STATUS_PANIC = 99,
} QiStatus;

// Opaque diagonal-Schmidt probe state.
typedef struct QiProbeState QiProbeState;

// Single-copy outcome statistics.
typedef struct QiMoments {
  double mu0;
  double mu1;
  double var0;
  double var1;
  double eta;
} QiMoments;

typedef struct QiCampaignResult {
  double empirical_false_alarm;
  double empirical_miss;
  double empirical_perr;
  double analytic_perr;
  double stderr_;
} QiCampaignResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next failing call on the same thread.
const char *qi_last_error_message(void);

void qi_clear_error(void);

// Library version as a static NUL-terminated string.
const char *qi_version(void);

double qi_erfc(double x);

enum QiStatus qi_qfi_ci(double a_re, double a_im, double n_b, double *out);

enum QiStatus qi_qfi_coherent(double n_s, double n_b, double *out);

enum QiStatus qi_qfi_tmsv(double n_s, double n_b, double *out);

enum QiStatus qi_qfi_psi(double p, int32_t sign, double n_b, double *out);

enum QiStatus qi_g2_tmsv(double n_s, double *out);

enum QiStatus qi_g2_schmidt(int32_t sign, size_t kappa, double z, double *out);

enum QiStatus qi_normalization_factor(int32_t sign,
                                      size_t kappa,
                                      size_t iota,
                                      double z,
                                      double *out);

enum QiStatus qi_quantum_advantage(double qfi_probe, double n_s, double n_b, double *out);

enum QiStatus qi_perr_from_snr(double r, uint64_t m, double *out);

enum QiStatus qi_perr_snr_exp_bound(double r, uint64_t m, double *out);

enum QiStatus qi_perr_from_fisher(double f, double eta, uint64_t m, double *out);

enum QiStatus qi_snr(const struct QiMoments *moments, double *out);

enum QiStatus qi_moments_quadrature(double a_re,
                                    double a_im,
                                    double phi,
                                    double n_b,
                                    double eta,
                                    struct QiMoments *out);

enum QiStatus qi_threshold(const struct QiMoments *moments, uint64_t m, double *out);

// Monte Carlo campaign; deterministic for a fixed seed.
enum QiStatus qi_run_campaign(const struct QiMoments *moments,
                              uint64_t m,
                              uint64_t trials,
                              uint64_t seed,
                              struct QiCampaignResult *out);

// TMSV with squeezing `z = tanh r`; cutoff fitted to `tail`.
enum QiStatus qi_probe_tmsv(double z, double tail, struct QiProbeState **out);

// Photon-added TMSV (`kappa >= 1`).
enum QiStatus qi_probe_mpa(double z, size_t kappa, double tail, struct QiProbeState **out);

// Photon-subtracted TMSV (`kappa >= 1`).
enum QiStatus qi_probe_mps(double z, size_t kappa, double tail, struct QiProbeState **out);

// Two-term toy state `√(1−p)|kk⟩ + √p|k+1,k+1⟩` with `k = 0` (minus) or `1` (plus).
enum QiStatus qi_probe_psi(double p, int32_t sign, struct QiProbeState **out);

// Releases a handle; NULL is ignored.
//
// # Safety
// `state` must be NULL or a handle from a `qi_probe_*` constructor that has
// not been freed.
void qi_probe_free(struct QiProbeState *state);

enum QiStatus qi_probe_mean_photon(const struct QiProbeState *state, double *out);

enum QiStatus qi_probe_m_min(const struct QiProbeState *state, size_t *out);

enum QiStatus qi_probe_len(const struct QiProbeState *state, size_t *out);

// Copies amplitudes `c_{m_min} ..` into `buf` (capacity `cap`); `written` gets the count.
//
// # Safety
// `buf` must be NULL or writable for `cap` doubles, and `written` NULL or
// writable for one `size_t`.
enum QiStatus qi_probe_amplitudes(const struct QiProbeState *state,
                                  double *buf,
                                  size_t cap,
                                  size_t *written);

enum QiStatus qi_probe_qfi(const struct QiProbeState *state, double n_b, double *out);

// QFI from the numerical oracle, with the bath cutoff fitted to `tail`.
enum QiStatus qi_probe_qfi_oracle(const struct QiProbeState *state,
                                  double n_b,
                                  double tail,
                                  double *out);

enum QiStatus qi_probe_g2(const struct QiProbeState *state, double *out);

enum QiStatus qi_probe_moments_joint_photon(const struct QiProbeState *state,
                                            double n_b,
                                            double eta,
                                            struct QiMoments *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QILLUM_H */
