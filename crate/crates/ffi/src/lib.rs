//! C ABI over `spm_pairs`.
//!
//! Conventions:
//! - every fallible function returns an [`SpmStatus`]; on failure the message
//!   is available from [`spm_last_error`] on the same thread;
//! - results are written through out-pointers, which are left untouched on failure;
//! - spectra and gate ledgers are opaque handles released with their `_free` function;
//! - all quantities are SI (m, s, W, Hz).

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use spm_pairs::analysis::{fit_fringe, fit_power_law, FringeScan};
use spm_pairs::counting::{coincidences, expected_stats, simulate_gates, simulate_gates_with_workers};
use spm_pairs::counting::{DetectorSpec, GateLedger, RateBreakdown};
use spm_pairs::leakage::{
    band_filter, min_detuning_closed_form, min_detuning_numeric, BandSide, LeakageSpectra, SpectrumModel,
};
use spm_pairs::propagation::PropagationConfig;
use spm_pairs::units::{FiberSpec, PumpPulse};
use spm_pairs::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpmStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Grid = 3,
    StepSize = 4,
    Bracket = 5,
    IllConditioned = 6,
    Config = 7,
    Input = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for SpmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => SpmStatus::Domain,
            Error::Grid(_) => SpmStatus::Grid,
            Error::StepSize(_) => SpmStatus::StepSize,
            Error::Bracket { .. } => SpmStatus::Bracket,
            Error::IllConditioned(_) => SpmStatus::IllConditioned,
            Error::Config(_) => SpmStatus::Config,
            Error::Input { .. } => SpmStatus::Input,
            Error::Io(_) => SpmStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpmBand {
    /// Short-wavelength side, λ_p − Δ.
    Idler = 0,
    /// Long-wavelength side, λ_p + Δ.
    Signal = 1,
}

impl From<SpmBand> for BandSide {
    fn from(b: SpmBand) -> Self {
        match b {
            SpmBand::Idler => BandSide::Idler,
            SpmBand::Signal => BandSide::Signal,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpmModel {
    /// Closed-form SPM spectrum, dispersion ignored.
    SpmOnly = 0,
    /// Split-step NLSE including β2.
    SplitStep = 1,
}

impl From<SpmModel> for SpectrumModel {
    fn from(m: SpmModel) -> Self {
        match m {
            SpmModel::SpmOnly => SpectrumModel::SpmOnly,
            SpmModel::SplitStep => SpectrumModel::SplitStep,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpmPump {
    pub peak_power_w: f64,
    /// 1/e half-width of the field envelope.
    pub t0_s: f64,
    pub center_wavelength_m: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpmFiber {
    pub length_m: f64,
    pub gamma_per_w_m: f64,
    pub zero_dispersion_wavelength_m: f64,
    pub beta2_s2_per_m: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpmGrid {
    pub n_points: usize,
    pub time_window_s: f64,
    pub n_steps: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmRates {
    pub mu_pair: f64,
    pub mu_raman_s: f64,
    pub mu_raman_i: f64,
    pub mu_spm_s: f64,
    pub mu_spm_i: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpmDetector {
    pub efficiency: f64,
    pub dark_prob: f64,
    pub gate_rate_hz: f64,
    pub gate_decimation: u32,
    pub dead_time_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmLeakage {
    pub n_pump_photons: f64,
    pub n_band_photons: f64,
    pub rejection_ratio: f64,
    pub passes_1e_minus_10: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmStats {
    pub singles_s: u64,
    pub singles_i: u64,
    pub c_c: u64,
    pub c_a: u64,
    /// NaN when `c_a` is 0.
    pub tar: f64,
    /// NaN when `c_a` is 0.
    pub tar_err: f64,
    pub n_gates: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmExpected {
    pub p_signal: f64,
    pub p_idler: f64,
    pub p_coincidence: f64,
    pub p_accidental: f64,
    pub tar: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmFringeFit {
    pub baseline: f64,
    pub baseline_err: f64,
    pub fringe_amp: f64,
    pub fringe_amp_err: f64,
    pub phase_offset: f64,
    pub visibility: f64,
    pub residual_rms: f64,
    pub baseline_clipped: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmPowerFit {
    pub s1: f64,
    pub s1_err: f64,
    pub s2: f64,
    pub s2_err: f64,
    pub residual_rms: f64,
}

/// Pump and propagated spectra for one pulse and fiber.
pub struct SpmSpectrum {
    pump: PumpPulse,
    spectra: LeakageSpectra,
}

/// Per-gate click record of one Monte Carlo run.
pub struct SpmLedger {
    ledger: GateLedger,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), SpmStatus>) -> SpmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error("internal panic");
            SpmStatus::Panic
        }
    }
}

fn fail(e: Error) -> SpmStatus {
    set_last_error(&e.to_string());
    SpmStatus::from(&e)
}

fn null(what: &str) -> SpmStatus {
    set_last_error(&format!("{what} is null"));
    SpmStatus::NullPointer
}

unsafe fn read<'a, T>(p: *const T, what: &str) -> Result<&'a T, SpmStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], SpmStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn pump(p: &SpmPump) -> Result<PumpPulse, SpmStatus> {
    PumpPulse::new(p.peak_power_w, p.t0_s, p.center_wavelength_m).map_err(fail)
}

fn fiber(f: &SpmFiber) -> Result<FiberSpec, SpmStatus> {
    FiberSpec::new(f.length_m, f.gamma_per_w_m, f.zero_dispersion_wavelength_m, f.beta2_s2_per_m).map_err(fail)
}

fn grid_or_default(g: *const SpmGrid, pulse: &PumpPulse, fiber: &FiberSpec) -> PropagationConfig {
    match unsafe { g.as_ref() } {
        Some(g) => PropagationConfig {
            n_points: g.n_points,
            time_window: g.time_window_s,
            n_steps: g.n_steps,
        },
        None => PropagationConfig::for_pulse(pulse, fiber),
    }
}

fn detector(d: &SpmDetector) -> DetectorSpec {
    DetectorSpec {
        efficiency: d.efficiency,
        dark_prob: d.dark_prob,
        gate_rate: d.gate_rate_hz,
        gate_decimation: d.gate_decimation,
        dead_time: d.dead_time_s,
    }
}

fn rates(r: &SpmRates) -> RateBreakdown {
    RateBreakdown {
        mu_pair: r.mu_pair,
        mu_raman_s: r.mu_raman_s,
        mu_raman_i: r.mu_raman_i,
        mu_spm_s: r.mu_spm_s,
        mu_spm_i: r.mu_spm_i,
    }
}

/// Message of the last failed call on this thread. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn spm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn spm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default grid for a pulse and fiber.
///
/// # Safety
/// Pointers must be null or valid for the pointee type.
#[no_mangle]
pub unsafe extern "C" fn spm_grid_default(p: *const SpmPump, f: *const SpmFiber, out: *mut SpmGrid) -> SpmStatus {
    guard(|| {
        let pulse = pump(read(p, "pump")?)?;
        let fib = fiber(read(f, "fiber")?)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let g = PropagationConfig::for_pulse(&pulse, &fib);
        *out = SpmGrid {
            n_points: g.n_points,
            time_window_s: g.time_window,
            n_steps: g.n_steps,
        };
        Ok(())
    })
}

/// Gaussian-approximation minimum detuning (m) for a 1e-10 leakage ratio.
///
/// # Safety
/// Pointers must be null or valid for the pointee type.
#[no_mangle]
pub unsafe extern "C" fn spm_min_detuning_closed_form(
    p: *const SpmPump,
    f: *const SpmFiber,
    filter_sigma_m: f64,
    out_m: *mut f64,
) -> SpmStatus {
    guard(|| {
        let pulse = pump(read(p, "pump")?)?;
        let fib = fiber(read(f, "fiber")?)?;
        let out = out_m.as_mut().ok_or_else(|| null("out_m"))?;
        if filter_sigma_m.is_nan() || filter_sigma_m <= 0.0 {
            return Err(fail(Error::Domain(format!("filter sigma must be > 0, got {filter_sigma_m}"))));
        }
        *out = min_detuning_closed_form(&pulse, &fib, filter_sigma_m);
        Ok(())
    })
}

/// Minimum detuning (m) from quadrature on the propagated spectrum. `grid` may be null.
///
/// # Safety
/// Pointers must be null or valid for the pointee type.
#[no_mangle]
pub unsafe extern "C" fn spm_min_detuning_numeric(
    p: *const SpmPump,
    f: *const SpmFiber,
    filter_sigma_m: f64,
    grid: *const SpmGrid,
    model: SpmModel,
    band: SpmBand,
    out_m: *mut f64,
) -> SpmStatus {
    guard(|| {
        let pulse = pump(read(p, "pump")?)?;
        let fib = fiber(read(f, "fiber")?)?;
        let out = out_m.as_mut().ok_or_else(|| null("out_m"))?;
        let cfg = grid_or_default(grid, &pulse, &fib);
        *out = min_detuning_numeric(&pulse, &fib, filter_sigma_m, &cfg, model.into(), band.into()).map_err(fail)?;
        Ok(())
    })
}

/// Computes input and output spectra. `grid` may be null. Release with [`spm_spectrum_free`].
///
/// # Safety
/// Pointers must be null or valid for the pointee type.
#[no_mangle]
pub unsafe extern "C" fn spm_spectrum_new(
    p: *const SpmPump,
    f: *const SpmFiber,
    grid: *const SpmGrid,
    model: SpmModel,
    out: *mut *mut SpmSpectrum,
) -> SpmStatus {
    guard(|| {
        let pulse = pump(read(p, "pump")?)?;
        let fib = fiber(read(f, "fiber")?)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = grid_or_default(grid, &pulse, &fib);
        let spectra = LeakageSpectra::compute(&pulse, &fib, &cfg, model.into()).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpmSpectrum { pump: pulse, spectra }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`spm_spectrum_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spm_spectrum_free(h: *mut SpmSpectrum) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of grid points.
///
/// # Safety
/// `h` must be null or a live spectrum handle.
#[no_mangle]
pub unsafe extern "C" fn spm_spectrum_len(h: *const SpmSpectrum) -> usize {
    h.as_ref().map_or(0, |s| s.spectra.output.len())
}

/// Copies ω (rad/s) and |E|²/2π (J per rad/s) of the output spectrum, or the
/// input spectrum when `input` is true. Buffers must hold [`spm_spectrum_len`] values.
///
/// # Safety
/// `h` must be a live handle; buffers must be valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn spm_spectrum_copy(
    h: *const SpmSpectrum,
    input: bool,
    omega: *mut f64,
    psd: *mut f64,
    cap: usize,
) -> SpmStatus {
    guard(|| {
        let s = read(h, "spectrum")?;
        let field = if input { &s.spectra.input } else { &s.spectra.output };
        if cap < field.len() {
            set_last_error(&format!("buffer holds {cap}, need {}", field.len()));
            return Err(SpmStatus::BufferTooSmall);
        }
        if omega.is_null() || psd.is_null() {
            return Err(null("output buffer"));
        }
        let w = std::slice::from_raw_parts_mut(omega, field.len());
        let d = std::slice::from_raw_parts_mut(psd, field.len());
        w.copy_from_slice(&field.omega_grid);
        d.copy_from_slice(&field.power_spectral_density());
        Ok(())
    })
}

/// Leakage into a Gaussian band at `detuning_m` from the pump on side `band`.
///
/// # Safety
/// `h` must be a live handle; `out` valid or null.
#[no_mangle]
pub unsafe extern "C" fn spm_spectrum_leakage(
    h: *const SpmSpectrum,
    detuning_m: f64,
    filter_sigma_m: f64,
    peak_transmission: f64,
    band: SpmBand,
    out: *mut SpmLeakage,
) -> SpmStatus {
    guard(|| {
        let s = read(h, "spectrum")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let filter =
            band_filter(&s.pump, detuning_m, filter_sigma_m, peak_transmission, band.into()).map_err(fail)?;
        let n_band = s.spectra.band_photons(&filter).map_err(fail)?;
        let n_pump = s.spectra.pump_photons();
        let ratio = n_band / n_pump;
        *out = SpmLeakage {
            n_pump_photons: n_pump,
            n_band_photons: n_band,
            rejection_ratio: ratio,
            passes_1e_minus_10: ratio < spm_pairs::leakage::REJECTION_THRESHOLD,
        };
        Ok(())
    })
}

/// Runs the gated Monte Carlo. `workers` = 0 uses all cores; the result does
/// not depend on it. Release with [`spm_ledger_free`].
///
/// # Safety
/// Pointers must be null or valid for the pointee type.
#[no_mangle]
pub unsafe extern "C" fn spm_simulate(
    r: *const SpmRates,
    det_s: *const SpmDetector,
    det_i: *const SpmDetector,
    n_gates: u64,
    seed: u64,
    workers: usize,
    out: *mut *mut SpmLedger,
) -> SpmStatus {
    guard(|| {
        let rates = rates(read(r, "rates")?);
        let ds = detector(read(det_s, "det_s")?);
        let di = detector(read(det_i, "det_i")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ledger = if workers == 0 {
            simulate_gates(&rates, &ds, &di, n_gates, seed)
        } else {
            simulate_gates_with_workers(&rates, &ds, &di, n_gates, seed, workers)
        }
        .map_err(fail)?;
        *out = Box::into_raw(Box::new(SpmLedger { ledger }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`spm_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spm_ledger_free(h: *mut SpmLedger) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Singles, coincidences and TAR of a ledger.
///
/// # Safety
/// `h` must be a live handle; `out` valid or null.
#[no_mangle]
pub unsafe extern "C" fn spm_ledger_stats(h: *const SpmLedger, out: *mut SpmStats) -> SpmStatus {
    guard(|| {
        let l = read(h, "ledger")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = coincidences(&l.ledger).map_err(fail)?;
        *out = SpmStats {
            singles_s: s.singles_s,
            singles_i: s.singles_i,
            c_c: s.c_c,
            c_a: s.c_a,
            tar: s.tar.unwrap_or(f64::NAN),
            tar_err: s.tar_std_error().unwrap_or(f64::NAN),
            n_gates: s.n_gates,
        };
        Ok(())
    })
}

/// Copies the sorted click gate indices of one band. `*len` receives the
/// number of clicks; with `buf` null or `cap` too small only `*len` is set
/// and `SPM_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `h` must be a live handle; `buf` valid for `cap` writes or null.
#[no_mangle]
pub unsafe extern "C" fn spm_ledger_hits(
    h: *const SpmLedger,
    band: SpmBand,
    buf: *mut u64,
    cap: usize,
    len: *mut usize,
) -> SpmStatus {
    guard(|| {
        let l = read(h, "ledger")?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        let hits = match band {
            SpmBand::Signal => &l.ledger.signal_hits,
            SpmBand::Idler => &l.ledger.idler_hits,
        };
        *len = hits.len();
        if buf.is_null() || cap < hits.len() {
            set_last_error(&format!("buffer holds {cap}, need {}", hits.len()));
            return Err(SpmStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(buf, hits.len()).copy_from_slice(hits);
        Ok(())
    })
}

/// Closed-form per-gate click probabilities (no dead time).
///
/// # Safety
/// Pointers must be null or valid for the pointee type.
#[no_mangle]
pub unsafe extern "C" fn spm_expected_stats(
    r: *const SpmRates,
    det_s: *const SpmDetector,
    det_i: *const SpmDetector,
    out: *mut SpmExpected,
) -> SpmStatus {
    guard(|| {
        let rates = rates(read(r, "rates")?);
        rates.validate().map_err(fail)?;
        let ds = detector(read(det_s, "det_s")?);
        let di = detector(read(det_i, "det_i")?);
        ds.validate().map_err(fail)?;
        di.validate().map_err(fail)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = expected_stats(&rates, &ds, &di);
        *out = SpmExpected {
            p_signal: e.p_signal,
            p_idler: e.p_idler,
            p_coincidence: e.p_coincidence,
            p_accidental: e.p_accidental,
            tar: e.tar,
        };
        Ok(())
    })
}

/// Fits N(φ) = A + B(1 + cos(φ + φ0)). `counts_err` may be null for Poisson weights.
///
/// # Safety
/// Arrays must hold `n` values; `out` valid or null.
#[no_mangle]
pub unsafe extern "C" fn spm_fit_fringe(
    phases: *const f64,
    counts: *const f64,
    counts_err: *const f64,
    n: usize,
    out: *mut SpmFringeFit,
) -> SpmStatus {
    guard(|| {
        let scan = FringeScan {
            phases: slice(phases, n, "phases")?.to_vec(),
            counts: slice(counts, n, "counts")?.to_vec(),
            counts_err: if counts_err.is_null() {
                None
            } else {
                Some(slice(counts_err, n, "counts_err")?.to_vec())
            },
        };
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let f = fit_fringe(&scan).map_err(fail)?;
        *out = SpmFringeFit {
            baseline: f.baseline,
            baseline_err: f.baseline_err,
            fringe_amp: f.fringe_amp,
            fringe_amp_err: f.fringe_amp_err,
            phase_offset: f.phase_offset,
            visibility: f.visibility,
            residual_rms: f.residual_rms,
            baseline_clipped: f.baseline_clipped,
        };
        Ok(())
    })
}

/// Non-negative fit of s1·P + s2·P². `errors` may be null for an unweighted fit.
///
/// # Safety
/// Arrays must hold `n` values; `out` valid or null.
#[no_mangle]
pub unsafe extern "C" fn spm_fit_power_law(
    powers: *const f64,
    baselines: *const f64,
    errors: *const f64,
    n: usize,
    out: *mut SpmPowerFit,
) -> SpmStatus {
    guard(|| {
        let p = slice(powers, n, "powers")?;
        let y = slice(baselines, n, "baselines")?;
        let e = if errors.is_null() {
            None
        } else {
            Some(slice(errors, n, "errors")?)
        };
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let f = fit_power_law(p, y, e).map_err(fail)?;
        *out = SpmPowerFit {
            s1: f.s1,
            s1_err: f.s1_err(),
            s2: f.s2,
            s2_err: f.s2_err(),
            residual_rms: f.residual_rms,
        };
        Ok(())
    })
}
