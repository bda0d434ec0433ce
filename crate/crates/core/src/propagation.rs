//! Pump propagation through the fiber.
//!
//! Two routes to E(L, ω):
//! - [`spm_spectrum`]: the exact SPM-only solution, a pure temporal phase
//!   `γ·P_p·L·exp(−T²/T0²)` applied to the Gaussian input, Fourier transformed.
//! - [`split_step_propagate`]: symmetric split-step integration of the NLSE with GVD.
//!
//! Transform convention is `E(ω) = ∫ A(T) exp(+i(ω−ω_p0)T) dT` with |A|² in watts,
//! so `(1/2π)∫|E|²dω` is the pulse energy.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::units::{FiberSpec, PumpPulse, SpectralField};

/// Largest nonlinear phase a single split step may accumulate, rad.
pub const MAX_STEP_PHASE: f64 = 0.05;
/// Fraction of the grid (split across both ends) checked for aliased energy.
const EDGE_FRACTION: f64 = 0.05;
const EDGE_ENERGY_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationConfig {
    /// Power of two, at least 2¹².
    pub n_points: usize,
    /// Total time span of the grid, s.
    pub time_window: f64,
    /// Split-step segments.
    pub n_steps: usize,
}

impl PropagationConfig {
    pub const DEFAULT_POINTS: usize = 1 << 14;
    pub const DEFAULT_WINDOW_T0: f64 = 64.0;

    /// Default grid (2¹⁴ points over 64·T0) with enough steps for the pulse's nonlinear phase.
    pub fn for_pulse(pulse: &PumpPulse, fiber: &FiberSpec) -> Self {
        let phase = fiber.nonlinear_phase(pulse.peak_power);
        let n_steps = ((phase / MAX_STEP_PHASE).ceil() as usize * 4).max(256);
        Self {
            n_points: Self::DEFAULT_POINTS,
            time_window: Self::DEFAULT_WINDOW_T0 * pulse.t0,
            n_steps,
        }
    }

    pub fn dt(&self) -> f64 {
        self.time_window / self.n_points as f64
    }

    pub fn domega(&self) -> f64 {
        2.0 * PI / self.time_window
    }

    pub fn validate(&self, pulse: &PumpPulse, fiber: &FiberSpec) -> Result<()> {
        if !self.n_points.is_power_of_two() || self.n_points < 1 << 12 {
            return Err(Error::Grid(format!(
                "n_points must be a power of two >= 4096, got {}",
                self.n_points
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::StepSize("n_steps must be >= 1".into()));
        }
        if !(self.time_window >= 16.0 * pulse.t0) {
            return Err(Error::Grid(format!(
                "time window {:e} s shorter than 16·t0 = {:e} s",
                self.time_window,
                16.0 * pulse.t0
            )));
        }
        let nyquist = PI / self.dt();
        let broadened = broadening_factor(pulse, fiber) / pulse.t0;
        if nyquist < 4.0 * broadened {
            return Err(Error::Grid(format!(
                "Nyquist frequency {nyquist:e} rad/s below 4x broadened half-width {broadened:e} rad/s"
            )));
        }
        Ok(())
    }

    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_points;
        let dt = self.dt();
        (0..n).map(move |i| (i as f64 - (n / 2) as f64) * dt)
    }

    fn omega_offsets(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_points;
        let dw = self.domega();
        (0..n).map(move |k| (k as f64 - (n / 2) as f64) * dw)
    }
}

/// √(1+(0.88·γ·P_p·L)²): approximate growth of the spectral width under SPM alone.
pub fn broadening_factor(pulse: &PumpPulse, fiber: &FiberSpec) -> f64 {
    let x = 0.88 * fiber.nonlinear_phase(pulse.peak_power);
    (1.0 + x * x).sqrt()
}

/// Time↔frequency transforms on the centered grid.
///
/// With T_n = (n−N/2)dt and Δω_k = (k−N/2)dω, `exp(iΔω_k T_n)` factors into an
/// unshifted DFT kernel times `(−1)^(n+k)` when N is a multiple of 4.
struct Transform {
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    backward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    dt: f64,
    n: usize,
}

impl Transform {
    fn new(cfg: &PropagationConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            // e^{+2πikn/N} is rustfft's "inverse" direction.
            forward: planner.plan_fft_inverse(cfg.n_points),
            backward: planner.plan_fft_forward(cfg.n_points),
            dt: cfg.dt(),
            n: cfg.n_points,
        }
    }

    fn alternate(buf: &mut [Complex64]) {
        for v in buf.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    }

    /// A(T) → E(ω) in place.
    fn to_spectrum(&self, buf: &mut [Complex64]) {
        Self::alternate(buf);
        self.forward.process(buf);
        Self::alternate(buf);
        for v in buf.iter_mut() {
            *v *= self.dt;
        }
    }

    /// E(ω) → A(T) in place.
    fn to_time(&self, buf: &mut [Complex64]) {
        Self::alternate(buf);
        self.backward.process(buf);
        Self::alternate(buf);
        let scale = 1.0 / (self.n as f64 * self.dt);
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

fn input_envelope(pulse: &PumpPulse, cfg: &PropagationConfig) -> Vec<Complex64> {
    let amp = pulse.peak_power.sqrt();
    cfg.times()
        .map(|t| {
            let x = t / pulse.t0;
            Complex64::new(amp * (-0.5 * x * x).exp(), 0.0)
        })
        .collect()
}

fn into_field(amplitude: Vec<Complex64>, pulse: &PumpPulse, cfg: &PropagationConfig) -> SpectralField {
    let carrier = pulse.center_omega();
    SpectralField {
        omega_grid: cfg.omega_offsets().map(|d| carrier + d).collect(),
        amplitude,
        carrier_omega: carrier,
    }
}

/// Fails when more than 1e-8 of the spectral energy sits in the outermost 5% of the grid.
pub fn check_aliasing(field: &SpectralField) -> Result<()> {
    let n = field.len();
    let edge = ((n as f64 * EDGE_FRACTION / 2.0).ceil() as usize).max(1);
    let total: f64 = field.amplitude.iter().map(|a| a.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(());
    }
    let outer: f64 = field.amplitude[..edge]
        .iter()
        .chain(&field.amplitude[n - edge..])
        .map(|a| a.norm_sqr())
        .sum();
    if outer > EDGE_ENERGY_LIMIT * total {
        return Err(Error::Grid(format!(
            "{:.3e} of spectral energy in the outer 5% of the grid; widen the bandwidth",
            outer / total
        )));
    }
    Ok(())
}

/// Spectrum of the unpropagated pump, E(0, ω).
pub fn input_spectrum(pulse: &PumpPulse, cfg: &PropagationConfig) -> Result<SpectralField> {
    let zero = FiberSpec {
        length: 1.0,
        gamma: 0.0,
        zero_dispersion_wavelength: pulse.center_wavelength,
        beta2: 0.0,
    };
    cfg.validate(pulse, &zero)?;
    let mut buf = input_envelope(pulse, cfg);
    Transform::new(cfg).to_spectrum(&mut buf);
    Ok(into_field(buf, pulse, cfg))
}

/// E(L, ω) under SPM alone. `fiber.beta2` is ignored.
pub fn spm_spectrum(pulse: &PumpPulse, fiber: &FiberSpec, cfg: &PropagationConfig) -> Result<SpectralField> {
    cfg.validate(pulse, fiber)?;
    let phase_peak = fiber.nonlinear_phase(pulse.peak_power);
    let mut buf = input_envelope(pulse, cfg);
    for (a, t) in buf.iter_mut().zip(cfg.times()) {
        let x = t / pulse.t0;
        *a *= Complex64::from_polar(1.0, phase_peak * (-x * x).exp());
    }
    Transform::new(cfg).to_spectrum(&mut buf);
    let field = into_field(buf, pulse, cfg);
    check_aliasing(&field)?;
    Ok(field)
}

/// Symmetric split-step solution of ∂A/∂z = −i(β2/2)∂²A/∂T² + iγ|A|²A over the fiber length.
///
/// The nonlinear sub-step is applied exactly (|A| is invariant under it); the
/// dispersive sub-step is the spectral phase `exp(iβ2Δω²h/2)`.
pub fn split_step_propagate(
    pulse: &PumpPulse,
    fiber: &FiberSpec,
    cfg: &PropagationConfig,
) -> Result<SpectralField> {
    cfg.validate(pulse, fiber)?;
    let h = fiber.length / cfg.n_steps as f64;
    let step_phase = fiber.gamma * pulse.peak_power * h;
    if step_phase >= MAX_STEP_PHASE {
        return Err(Error::StepSize(format!(
            "per-step nonlinear phase {step_phase:.4} rad >= {MAX_STEP_PHASE}; increase n_steps"
        )));
    }

    let transform = Transform::new(cfg);
    let half: Vec<Complex64> = cfg
        .omega_offsets()
        .map(|dw| Complex64::from_polar(1.0, 0.5 * fiber.beta2 * dw * dw * (0.5 * h)))
        .collect();
    let full: Vec<Complex64> = half.iter().map(|p| p * p).collect();

    let mut buf = input_envelope(pulse, cfg);
    transform.to_spectrum(&mut buf);
    for step in 0..cfg.n_steps {
        let linear = if step == 0 { &half } else { &full };
        for (e, p) in buf.iter_mut().zip(linear) {
            *e *= p;
        }
        transform.to_time(&mut buf);
        for a in buf.iter_mut() {
            *a *= Complex64::from_polar(1.0, fiber.gamma * a.norm_sqr() * h);
        }
        transform.to_spectrum(&mut buf);
    }
    for (e, p) in buf.iter_mut().zip(&half) {
        *e *= p;
    }

    let field = into_field(buf, pulse, cfg);
    check_aliasing(&field)?;
    Ok(field)
}

/// Time-domain envelope A(T) of a spectral field built on `cfg`'s grid.
pub fn time_envelope(field: &SpectralField, cfg: &PropagationConfig) -> Result<Vec<Complex64>> {
    if field.len() != cfg.n_points {
        return Err(Error::Grid(format!(
            "field has {} points, config has {}",
            field.len(),
            cfg.n_points
        )));
    }
    let mut buf = field.amplitude.clone();
    Transform::new(cfg).to_time(&mut buf);
    Ok(buf)
}

/// Largest pointwise |E1 − E2| relative to the peak |E2|.
pub fn max_relative_deviation(a: &SpectralField, b: &SpectralField) -> f64 {
    let peak = b.amplitude.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return a.amplitude.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    a.amplitude
        .iter()
        .zip(&b.amplitude)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / peak
}
