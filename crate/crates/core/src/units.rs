//! Physical constants, shared domain types and unit conversions.
//!
//! Everything inside the crate is SI (m, s, W, rad/s). The CLI converts
//! nm/ps/mW/THz at the boundary through the `*_nm`, `*_ps` helpers here.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Result};

/// Speed of light in vacuum, m/s (exact, CODATA 2018).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reduced Planck constant, J·s (exact, CODATA 2018: h = 6.626_070_15e-34 J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

pub const NM: f64 = 1e-9;
pub const PS: f64 = 1e-12;
pub const MW: f64 = 1e-3;
pub const UW: f64 = 1e-6;
pub const MHZ: f64 = 1e6;

/// `2√ln2`, ratio between FWHM and 1/e half-width of a Gaussian power profile.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * std::f64::consts::LN_2.sqrt()
}

/// Transform-limited Gaussian pump pulse, field ∝ exp(−T²/2T0²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpPulse {
    /// Peak power, W.
    pub peak_power: f64,
    /// 1/e half-width of the field envelope, s.
    pub t0: f64,
    /// Central wavelength, m.
    pub center_wavelength: f64,
}

impl PumpPulse {
    pub fn new(peak_power: f64, t0: f64, center_wavelength: f64) -> Result<Self> {
        let pulse = Self {
            peak_power,
            t0,
            center_wavelength,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// Pulse whose power spectrum has the given FWHM (in wavelength).
    pub fn from_spectral_fwhm(peak_power: f64, fwhm: f64, center_wavelength: f64) -> Result<Self> {
        let sigma = fwhm_to_sigma(fwhm)?;
        let t0 = center_wavelength * center_wavelength / (2.0 * PI * SPEED_OF_LIGHT * sigma);
        Self::new(peak_power, t0, center_wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_power >= 0.0) || !self.peak_power.is_finite() {
            return domain(format!("peak power must be >= 0, got {}", self.peak_power));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return domain(format!("t0 must be > 0, got {}", self.t0));
        }
        if !(self.center_wavelength > 1.2e-6 && self.center_wavelength < 1.7e-6) {
            return domain(format!(
                "pump wavelength {} m outside (1.2e-6, 1.7e-6)",
                self.center_wavelength
            ));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.center_wavelength
    }

    /// Pulse energy, J: P_p·T0·√π for a Gaussian power profile.
    pub fn energy(&self) -> f64 {
        self.peak_power * self.t0 * PI.sqrt()
    }

    /// N_p = E/(ħω_p0).
    pub fn photon_number(&self) -> f64 {
        self.energy() / (HBAR * self.center_omega())
    }

    pub fn with_peak_power(self, peak_power: f64) -> Self {
        Self { peak_power, ..self }
    }
}

/// Fiber under test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberSpec {
    /// m
    pub length: f64,
    /// Nonlinear coefficient, 1/(W·m).
    pub gamma: f64,
    /// m
    pub zero_dispersion_wavelength: f64,
    /// GVD at the pump wavelength, s²/m. Negative is anomalous.
    pub beta2: f64,
}

impl FiberSpec {
    pub fn new(length: f64, gamma: f64, zero_dispersion_wavelength: f64, beta2: f64) -> Result<Self> {
        let fiber = Self {
            length,
            gamma,
            zero_dispersion_wavelength,
            beta2,
        };
        fiber.validate()?;
        Ok(fiber)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return domain(format!("fiber length must be > 0, got {}", self.length));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return domain(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !self.beta2.is_finite() {
            return domain("beta2 must be finite");
        }
        Ok(())
    }

    /// Nonlinear phase γ·P·L accumulated at the given peak power.
    pub fn nonlinear_phase(&self, peak_power: f64) -> f64 {
        self.gamma * peak_power * self.length
    }
}

/// β2 at `wavelength` from a linear dispersion model D(λ) = S0·(λ − λ0).
///
/// `slope` is S0 in s/m³ (1 ps/(nm²·km) = 1e3 s/m³). Uses β2 = −λ²D/(2πc).
pub fn beta2_from_dispersion_slope(wavelength: f64, zero_dispersion_wavelength: f64, slope: f64) -> f64 {
    let d = slope * (wavelength - zero_dispersion_wavelength);
    -wavelength * wavelength * d / (2.0 * PI * SPEED_OF_LIGHT)
}

/// Gaussian band-pass filter in wavelength, power transmission
/// `peak · exp(−(λ−λc)²/σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandFilter {
    pub center_wavelength: f64,
    /// 1/e half-width of the power transmission, m.
    pub sigma: f64,
    pub peak_transmission: f64,
}

impl BandFilter {
    pub fn new(center_wavelength: f64, sigma: f64, peak_transmission: f64) -> Result<Self> {
        let filter = Self {
            center_wavelength,
            sigma,
            peak_transmission,
        };
        filter.validate()?;
        Ok(filter)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength > 0.0) {
            return domain("filter center wavelength must be > 0");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return domain(format!("filter sigma must be > 0, got {}", self.sigma));
        }
        if !(self.peak_transmission > 0.0 && self.peak_transmission <= 1.0) {
            return domain(format!(
                "peak transmission must be in (0, 1], got {}",
                self.peak_transmission
            ));
        }
        Ok(())
    }

    pub fn center_omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.center_wavelength
    }

    pub fn transmission_at_wavelength(&self, wavelength: f64) -> f64 {
        let x = (wavelength - self.center_wavelength) / self.sigma;
        self.peak_transmission * (-x * x).exp()
    }

    /// Transmission at angular frequency ω, mapping the offset through the
    /// local relation dλ = −λc²/(2πc)·dω about the filter center.
    pub fn transmission(&self, omega: f64) -> f64 {
        let dlambda_domega = -self.center_wavelength * self.center_wavelength / (2.0 * PI * SPEED_OF_LIGHT);
        let offset = dlambda_domega * (omega - self.center_omega());
        let x = offset / self.sigma;
        self.peak_transmission * (-x * x).exp()
    }
}

/// Pulse train at the fiber input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseTrain {
    /// Hz
    pub repetition_rate: f64,
    /// W
    pub average_power: f64,
}

impl PulseTrain {
    pub fn new(repetition_rate: f64, average_power: f64) -> Result<Self> {
        if !(repetition_rate > 0.0) || !repetition_rate.is_finite() {
            return domain(format!("repetition rate must be > 0, got {repetition_rate}"));
        }
        if !(average_power >= 0.0) || !average_power.is_finite() {
            return domain(format!("average power must be >= 0, got {average_power}"));
        }
        Ok(Self {
            repetition_rate,
            average_power,
        })
    }

    pub fn pulse_energy(&self) -> f64 {
        self.average_power / self.repetition_rate
    }

    pub fn photons_per_pulse(&self, wavelength: f64) -> Result<f64> {
        Ok(self.pulse_energy() / (HBAR * wavelength_to_angular_frequency(wavelength)?))
    }
}

/// Complex spectral field on a uniform angular-frequency grid.
///
/// Normalized so that `(1/2π)·∫|E(ω)|² dω` is the pulse energy in joules.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    /// Absolute angular frequency of each sample, rad/s, uniform and increasing.
    pub omega_grid: Vec<f64>,
    /// √(J·s)
    pub amplitude: Vec<Complex64>,
    /// Carrier ω_p0 the field was built around, rad/s.
    pub carrier_omega: f64,
}

impl SpectralField {
    pub fn len(&self) -> usize {
        self.omega_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        if self.omega_grid.len() < 2 {
            return 0.0;
        }
        self.omega_grid[1] - self.omega_grid[0]
    }

    /// |E(ω)|²/2π, J per rad/s. Integrates over ω to the pulse energy.
    pub fn power_spectral_density(&self) -> Vec<f64> {
        self.amplitude
            .iter()
            .map(|a| a.norm_sqr() / (2.0 * PI))
            .collect()
    }

    /// Trapezoidal `(1/2π)∫|E|²·weight(ω) dω`.
    pub fn weighted_energy(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let h = self.spacing();
        let mut sum = 0.0;
        for (i, (w, a)) in self.omega_grid.iter().zip(&self.amplitude).enumerate() {
            let f = a.norm_sqr() * weight(*w);
            sum += if i == 0 || i == n - 1 { 0.5 * f } else { f };
        }
        sum * h / (2.0 * PI)
    }

    pub fn energy(&self) -> f64 {
        self.weighted_energy(|_| 1.0)
    }

    /// Root-mean-square width of the power spectrum about its centroid, rad/s.
    pub fn rms_width(&self) -> f64 {
        let total: f64 = self.amplitude.iter().map(|a| a.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mean: f64 = self
            .omega_grid
            .iter()
            .zip(&self.amplitude)
            .map(|(w, a)| (w - self.carrier_omega) * a.norm_sqr())
            .sum::<f64>()
            / total;
        let var: f64 = self
            .omega_grid
            .iter()
            .zip(&self.amplitude)
            .map(|(w, a)| {
                let d = w - self.carrier_omega - mean;
                d * d * a.norm_sqr()
            })
            .sum::<f64>()
            / total;
        var.sqrt()
    }

    /// 1/e half-width of the power spectrum, rad/s, defined as √2 × RMS width
    /// (exact for a Gaussian).
    pub fn half_width_1e(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.rms_width()
    }
}

pub fn wavelength_to_angular_frequency(wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return domain(format!("wavelength must be > 0, got {wavelength}"));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT / wavelength)
}

pub fn angular_frequency_to_wavelength(omega: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return domain(format!("angular frequency must be > 0, got {omega}"));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT / omega)
}

/// Frequency detuning Δν = cΔλ/λ² (Hz) for a small wavelength offset about `center`.
pub fn wavelength_offset_to_detuning(offset: f64, center: f64) -> Result<f64> {
    if !(center > 0.0) {
        return domain(format!("center wavelength must be > 0, got {center}"));
    }
    Ok(SPEED_OF_LIGHT * offset / (center * center))
}

/// Inverse of [`wavelength_offset_to_detuning`].
pub fn detuning_to_wavelength_offset(detuning: f64, center: f64) -> Result<f64> {
    if !(center > 0.0) {
        return domain(format!("center wavelength must be > 0, got {center}"));
    }
    Ok(detuning * center * center / SPEED_OF_LIGHT)
}

/// Power-spectrum FWHM to 1/e half-width: `fwhm / (2√ln2)`.
pub fn fwhm_to_sigma(fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) || !fwhm.is_finite() {
        return domain(format!("FWHM must be > 0, got {fwhm}"));
    }
    Ok(fwhm / fwhm_per_sigma())
}

pub fn sigma_to_fwhm(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return domain(format!("sigma must be > 0, got {sigma}"));
    }
    Ok(sigma * fwhm_per_sigma())
}

/// 1/e half-width of the pump power spectrum in wavelength, σ_p = λ_p0²/(2πcT0).
pub fn pump_sigma(pulse: &PumpPulse) -> f64 {
    pulse.center_wavelength * pulse.center_wavelength / (2.0 * PI * SPEED_OF_LIGHT * pulse.t0)
}

/// Peak power of a Gaussian pulse train: `(P_ave/f_rep)/(T0·√π)`.
pub fn peak_power_from_average(train: &PulseTrain, t0: f64) -> Result<f64> {
    if !(train.repetition_rate > 0.0) {
        return domain("repetition rate must be > 0");
    }
    if !(t0 > 0.0) {
        return domain(format!("t0 must be > 0, got {t0}"));
    }
    if train.average_power < 0.0 {
        return domain("average power must be >= 0");
    }
    Ok(train.pulse_energy() / (t0 * PI.sqrt()))
}

pub fn average_power_from_peak(peak_power: f64, repetition_rate: f64, t0: f64) -> f64 {
    peak_power * t0 * PI.sqrt() * repetition_rate
}
