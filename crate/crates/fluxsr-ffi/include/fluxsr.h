/* C interface to the fluxsr simulation toolkit. */

#ifndef FLUXSR_H
#define FLUXSR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum FluxsrStatus {
  FLUXSR_STATUS_OK = 0,
  // A required pointer argument was null.
  FLUXSR_STATUS_NULL_ARGUMENT = 1,
  // Arguments failed validation; see `fluxsr_last_error`.
  FLUXSR_STATUS_INVALID_ARGUMENT = 2,
  // The computation failed or panicked; see `fluxsr_last_error`.
  FLUXSR_STATUS_NUMERICAL = 3,
} FluxsrStatus;

// A frequency-broadened ensemble coupled to one lossy cavity, reduced to
// the collective-decay description.
typedef struct FluxsrDecay FluxsrDecay;

// A sampled ensemble of characterized devices.
typedef struct FluxsrEnsemble FluxsrEnsemble;

// One characterized device: junction parameters plus the extracted
// two-level reduction.
typedef struct FluxsrQubit FluxsrQubit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message (NUL-terminated) into `buf`; returns the
// full length including the terminator. With `cap` of zero or a null
// `buf`, nothing is copied, so calling once with (NULL, 0) sizes the
// buffer. Messages are per thread.
size_t fluxsr_last_error(char *buf, size_t cap);

// Static version string (NUL-terminated, never freed).
const char *fluxsr_version(void);

// Characterize one device. `basis_cutoff` of 12 reproduces the production
// numbers; smaller is faster and less accurate.
enum FluxsrStatus fluxsr_qubit_new(double alpha,
                                   double beta1,
                                   double beta2,
                                   double ej_ghz,
                                   double ej_over_ec,
                                   size_t basis_cutoff,
                                   struct FluxsrQubit **out);

void fluxsr_qubit_free(struct FluxsrQubit *qubit);

// Tunnel splitting at the symmetry point, GHz.
enum FluxsrStatus fluxsr_qubit_delta_ghz(const struct FluxsrQubit *qubit, double *out);

// Persistent current, amperes.
enum FluxsrStatus fluxsr_qubit_ip_amperes(const struct FluxsrQubit *qubit, double *out);

// Root-mean-square misfit of the two-level form, GHz.
enum FluxsrStatus fluxsr_qubit_fit_rms_ghz(const struct FluxsrQubit *qubit, double *out);

// Transition frequency at external flux `flux` (units of the flux
// quantum), GHz.
enum FluxsrStatus fluxsr_qubit_frequency_ghz(const struct FluxsrQubit *qubit,
                                             double flux,
                                             double *out);

// Sample and characterize `n_qubits` devices with a common relative spread
// `sigma` on all three junction parameters.
enum FluxsrStatus fluxsr_ensemble_new(double sigma,
                                      double mean_alpha,
                                      size_t n_qubits,
                                      uint64_t seed,
                                      double ej_ghz,
                                      double ej_over_ec,
                                      size_t basis_cutoff,
                                      struct FluxsrEnsemble **out);

void fluxsr_ensemble_free(struct FluxsrEnsemble *ensemble);

// Number of devices in the ensemble.
enum FluxsrStatus fluxsr_ensemble_len(const struct FluxsrEnsemble *ensemble, size_t *out);

// Tunnel splitting and persistent current of device `index`.
enum FluxsrStatus fluxsr_ensemble_qubit(const struct FluxsrEnsemble *ensemble,
                                        size_t index,
                                        double *out_delta_ghz,
                                        double *out_ip_amperes);

// Standard deviation of the ensemble transition frequencies at `flux`, GHz.
enum FluxsrStatus fluxsr_ensemble_std_ghz(const struct FluxsrEnsemble *ensemble,
                                          double flux,
                                          double *out);

// External flux minimizing the frequency spread over `[flux_min,
// flux_max]` (grid scan plus golden-section refinement), and the spread
// there.
enum FluxsrStatus fluxsr_ensemble_optimal_flux(const struct FluxsrEnsemble *ensemble,
                                               double flux_min,
                                               double flux_max,
                                               size_t grid,
                                               double *out_flux,
                                               double *out_std_ghz);

// Build the collective-decay system. Frequencies in MHz; qubit
// frequencies are drawn once from a normal distribution of width
// `delta_omega_mhz` around `omega_bar_mhz` (realization 0 of `seed`).
enum FluxsrStatus fluxsr_decay_new(size_t n_qubits,
                                   double omega_bar_mhz,
                                   double delta_omega_mhz,
                                   double cavity_detuning_mhz,
                                   double g_mhz,
                                   double kappa_mhz,
                                   uint64_t seed,
                                   struct FluxsrDecay **out);

void fluxsr_decay_free(struct FluxsrDecay *decay);

// Per-qubit emission rate through the cavity, `kappa g^2 / (kappa^2 +
// chi^2)` in rad/ns, where chi is the cavity detuning from the ensemble
// mean.
enum FluxsrStatus fluxsr_decay_rate(const struct FluxsrDecay *decay, double *out);

// Superradiance time for `m` initial excitations, ns.
enum FluxsrStatus fluxsr_decay_sr_time_ns(const struct FluxsrDecay *decay, size_t m, double *out);

// Decay `m` initially excited qubits and report the peak of <J+J-> and
// the time it occurred. `step_divisor` of 8 or more reproduces the peak
// to better than a part in a thousand.
enum FluxsrStatus fluxsr_decay_peak(const struct FluxsrDecay *decay,
                                    size_t m,
                                    double step_divisor,
                                    double *out_max_jpjm,
                                    double *out_t_ns);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLUXSR_H */
