#ifndef SPM_PAIRS_H
#define SPM_PAIRS_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpmStatus {
  SPM_STATUS_OK = 0,
  SPM_STATUS_NULL_POINTER = 1,
  SPM_STATUS_DOMAIN = 2,
  SPM_STATUS_GRID = 3,
  SPM_STATUS_STEP_SIZE = 4,
  SPM_STATUS_BRACKET = 5,
  SPM_STATUS_ILL_CONDITIONED = 6,
  SPM_STATUS_CONFIG = 7,
  SPM_STATUS_INPUT = 8,
  SPM_STATUS_IO = 9,
  SPM_STATUS_BUFFER_TOO_SMALL = 10,
  SPM_STATUS_PANIC = 11,
} SpmStatus;

typedef enum SpmModel {
  // Closed-form SPM spectrum, dispersion ignored.
  SPM_MODEL_SPM_ONLY = 0,
  // Split-step NLSE including β2.
  SPM_MODEL_SPLIT_STEP = 1,
} SpmModel;

typedef enum SpmBand {
  // Short-wavelength side, λ_p − Δ.
  SPM_BAND_IDLER = 0,
  // Long-wavelength side, λ_p + Δ.
  SPM_BAND_SIGNAL = 1,
} SpmBand;

// Per-gate click record of one Monte Carlo run.
typedef struct SpmLedger SpmLedger;

// Pump and propagated spectra for one pulse and fiber.
typedef struct SpmSpectrum SpmSpectrum;

typedef struct SpmPump {
  double peak_power_w;
  // 1/e half-width of the field envelope.
  double t0_s;
  double center_wavelength_m;
} SpmPump;

typedef struct SpmFiber {
  double length_m;
  double gamma_per_w_m;
  double zero_dispersion_wavelength_m;
  double beta2_s2_per_m;
} SpmFiber;

typedef struct SpmGrid {
  size_t n_points;
  double time_window_s;
  size_t n_steps;
} SpmGrid;

typedef struct SpmLeakage {
  double n_pump_photons;
  double n_band_photons;
  double rejection_ratio;
  bool passes_1e_minus_10;
} SpmLeakage;

typedef struct SpmRates {
  double mu_pair;
  double mu_raman_s;
  double mu_raman_i;
  double mu_spm_s;
  double mu_spm_i;
} SpmRates;

typedef struct SpmDetector {
  double efficiency;
  double dark_prob;
  double gate_rate_hz;
  uint32_t gate_decimation;
  double dead_time_s;
} SpmDetector;

typedef struct SpmStats {
  uint64_t singles_s;
  uint64_t singles_i;
  uint64_t c_c;
  uint64_t c_a;
  // NaN when `c_a` is 0.
  double tar;
  // NaN when `c_a` is 0.
  double tar_err;
  uint64_t n_gates;
} SpmStats;

typedef struct SpmExpected {
  double p_signal;
  double p_idler;
  double p_coincidence;
  double p_accidental;
  double tar;
} SpmExpected;

typedef struct SpmFringeFit {
  double baseline;
  double baseline_err;
  double fringe_amp;
  double fringe_amp_err;
  double phase_offset;
  double visibility;
  double residual_rms;
  bool baseline_clipped;
} SpmFringeFit;

typedef struct SpmPowerFit {
  double s1;
  double s1_err;
  double s2;
  double s2_err;
  double residual_rms;
} SpmPowerFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. Valid until the next failing call.
const char *spm_last_error(void);

// Library version, static string.
const char *spm_version(void);

// Default grid for a pulse and fiber.
//
// # Safety
// Pointers must be null or valid for the pointee type.
enum SpmStatus spm_grid_default(const struct SpmPump *p,
                                const struct SpmFiber *f,
                                struct SpmGrid *out);

// Gaussian-approximation minimum detuning (m) for a 1e-10 leakage ratio.
//
// # Safety
// Pointers must be null or valid for the pointee type.
enum SpmStatus spm_min_detuning_closed_form(const struct SpmPump *p,
                                            const struct SpmFiber *f,
                                            double filter_sigma_m,
                                            double *out_m);

// Minimum detuning (m) from quadrature on the propagated spectrum. `grid` may be null.
//
// # Safety
// Pointers must be null or valid for the pointee type.
enum SpmStatus spm_min_detuning_numeric(const struct SpmPump *p,
                                        const struct SpmFiber *f,
                                        double filter_sigma_m,
                                        const struct SpmGrid *grid,
                                        enum SpmModel model,
                                        enum SpmBand band,
                                        double *out_m);

// Computes input and output spectra. `grid` may be null. Release with [`spm_spectrum_free`].
//
// # Safety
// Pointers must be null or valid for the pointee type.
enum SpmStatus spm_spectrum_new(const struct SpmPump *p,
                                const struct SpmFiber *f,
                                const struct SpmGrid *grid,
                                enum SpmModel model,
                                struct SpmSpectrum **out);

// # Safety
// `h` must be null or a handle from [`spm_spectrum_new`] not yet freed.
void spm_spectrum_free(struct SpmSpectrum *h);

// Number of grid points.
//
// # Safety
// `h` must be null or a live spectrum handle.
size_t spm_spectrum_len(const struct SpmSpectrum *h);

// Copies ω (rad/s) and |E|²/2π (J per rad/s) of the output spectrum, or the
// input spectrum when `input` is true. Buffers must hold [`spm_spectrum_len`] values.
//
// # Safety
// `h` must be a live handle; buffers must be valid for `cap` writes.
enum SpmStatus spm_spectrum_copy(const struct SpmSpectrum *h,
                                 bool input,
                                 double *omega,
                                 double *psd,
                                 size_t cap);

// Leakage into a Gaussian band at `detuning_m` from the pump on side `band`.
//
// # Safety
// `h` must be a live handle; `out` valid or null.
enum SpmStatus spm_spectrum_leakage(const struct SpmSpectrum *h,
                                    double detuning_m,
                                    double filter_sigma_m,
                                    double peak_transmission,
                                    enum SpmBand band,
                                    struct SpmLeakage *out);

// Runs the gated Monte Carlo. `workers` = 0 uses all cores; the result does
// not depend on it. Release with [`spm_ledger_free`].
//
// # Safety
// Pointers must be null or valid for the pointee type.
enum SpmStatus spm_simulate(const struct SpmRates *r,
                            const struct SpmDetector *det_s,
                            const struct SpmDetector *det_i,
                            uint64_t n_gates,
                            uint64_t seed,
                            size_t workers,
                            struct SpmLedger **out);

// # Safety
// `h` must be null or a handle from [`spm_simulate`] not yet freed.
void spm_ledger_free(struct SpmLedger *h);

// Singles, coincidences and TAR of a ledger.
//
// # Safety
// `h` must be a live handle; `out` valid or null.
enum SpmStatus spm_ledger_stats(const struct SpmLedger *h, struct SpmStats *out);

// Copies the sorted click gate indices of one band. `*len` receives the
// number of clicks; with `buf` null or `cap` too small only `*len` is set
// and `SPM_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `h` must be a live handle; `buf` valid for `cap` writes or null.
enum SpmStatus spm_ledger_hits(const struct SpmLedger *h,
                               enum SpmBand band,
                               uint64_t *buf,
                               size_t cap,
                               size_t *len);

// Closed-form per-gate click probabilities (no dead time).
//
// # Safety
// Pointers must be null or valid for the pointee type.
enum SpmStatus spm_expected_stats(const struct SpmRates *r,
                                  const struct SpmDetector *det_s,
                                  const struct SpmDetector *det_i,
                                  struct SpmExpected *out);

// Fits N(φ) = A + B(1 + cos(φ + φ0)). `counts_err` may be null for Poisson weights.
//
// # Safety
// Arrays must hold `n` values; `out` valid or null.
enum SpmStatus spm_fit_fringe(const double *phases,
                              const double *counts,
                              const double *counts_err,
                              size_t n,
                              struct SpmFringeFit *out);

// Non-negative fit of s1·P + s2·P². `errors` may be null for an unweighted fit.
//
// # Safety
// Arrays must hold `n` values; `out` valid or null.
enum SpmStatus spm_fit_power_law(const double *powers,
                                 const double *baselines,
                                 const double *errors,
                                 size_t n,
                                 struct SpmPowerFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPM_PAIRS_H */
