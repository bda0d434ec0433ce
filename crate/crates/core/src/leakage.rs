//! Pump leakage into the signal/idler filter bands.
//!
//! Photon numbers are integrals of the spectral field; the rejection test asks
//! that the band photons stay below 1e-10 of the pump photons per pulse.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::propagation::{input_spectrum, spm_spectrum, split_step_propagate, broadening_factor, PropagationConfig};
use crate::units::{pump_sigma, BandFilter, FiberSpec, PumpPulse, SpectralField, HBAR, NM};

pub const REJECTION_THRESHOLD: f64 = 1e-10;

/// Search bracket for the minimum detuning, m.
pub const DETUNING_BRACKET: (f64, f64) = (0.5 * NM, 20.0 * NM);
pub const DETUNING_TOLERANCE: f64 = 1e-3 * NM;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageReport {
    pub n_pump_photons: f64,
    pub n_spm_band: f64,
    pub rejection_ratio: f64,
    pub passes_1e_minus_10: bool,
}

impl LeakageReport {
    pub fn from_counts(n_pump_photons: f64, n_spm_band: f64) -> Result<Self> {
        if !(n_pump_photons > 0.0) {
            return domain(format!("pump photon number must be > 0, got {n_pump_photons}"));
        }
        if !(n_spm_band >= 0.0) {
            return domain(format!("band photon number must be >= 0, got {n_spm_band}"));
        }
        Ok(Self::from_ratio(n_pump_photons, n_spm_band, n_spm_band / n_pump_photons))
    }

    fn from_ratio(n_pump_photons: f64, n_spm_band: f64, rejection_ratio: f64) -> Self {
        Self {
            n_pump_photons,
            n_spm_band,
            rejection_ratio,
            passes_1e_minus_10: rejection_ratio < REJECTION_THRESHOLD,
        }
    }
}

/// Which side of the pump a band sits on.
///
/// Detuning is Ω = (ω_i − ω_p)/2π > 0, so the idler is on the short-wavelength side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BandSide {
    Idler,
    Signal,
}

impl BandSide {
    pub fn center_wavelength(self, pump_wavelength: f64, detuning: f64) -> f64 {
        match self {
            BandSide::Idler => pump_wavelength - detuning,
            BandSide::Signal => pump_wavelength + detuning,
        }
    }
}

/// How E(L, ω) is obtained for quadrature-based leakage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumModel {
    /// Closed-form SPM-only spectrum, dispersion ignored.
    SpmOnly,
    /// Split-step NLSE including β2.
    SplitStep,
}

pub fn band_filter(pump: &PumpPulse, detuning: f64, sigma: f64, peak_transmission: f64, side: BandSide) -> Result<BandFilter> {
    BandFilter::new(side.center_wavelength(pump.center_wavelength, detuning), sigma, peak_transmission)
}

/// N_p = (1/2πħω_p0)·∫|E(0,ω)|²dω.
pub fn pump_photon_number(field: &SpectralField) -> Result<f64> {
    if field.len() < 2 {
        return domain("spectral field has no grid");
    }
    Ok(field.energy() / (HBAR * field.carrier_omega))
}

/// N_S = (1/2πħω_f0)·∫|E(L,ω)|²f(ω)dω for a filter centered at ω_f0.
pub fn spm_band_photons(field: &SpectralField, filter: &BandFilter) -> Result<f64> {
    if field.len() < 2 {
        return domain("spectral field has no grid");
    }
    let center = filter.center_omega();
    let lo = field.omega_grid[0];
    let hi = field.omega_grid[field.len() - 1];
    if !(center > lo && center < hi) {
        return domain(format!(
            "filter center {:.4} nm outside the spectral grid",
            filter.center_wavelength / NM
        ));
    }
    Ok(field.weighted_energy(|w| filter.transmission(w)) / (HBAR * center))
}

/// Photon numbers for the unpropagated pump and the propagated field in one band.
pub fn check_rejection(input: &SpectralField, output: &SpectralField, filter: &BandFilter) -> Result<LeakageReport> {
    let n_p = pump_photon_number(input)?;
    let n_s = spm_band_photons(output, filter)?;
    LeakageReport::from_counts(n_p, n_s)
}

/// Gaussian-approximation leakage `exp(−Δ²/(σ_p²·B² + σ_f²))`, B the broadening factor.
pub fn rejection_ratio_closed_form(pulse: &PumpPulse, fiber: &FiberSpec, sigma_filter: f64, detuning: f64) -> f64 {
    let width2 = effective_width_sq(pulse, fiber, sigma_filter);
    (-detuning * detuning / width2).exp()
}

fn effective_width_sq(pulse: &PumpPulse, fiber: &FiberSpec, sigma_filter: f64) -> f64 {
    let sp = pump_sigma(pulse) * broadening_factor(pulse, fiber);
    sp * sp + sigma_filter * sigma_filter
}

/// `√(10 ln 10)·√(σ_p²[1+(0.88γP_pL)²] + σ_f²)`, the detuning at which the
/// Gaussian-approximation leakage reaches 1e-10.
pub fn min_detuning_closed_form(pulse: &PumpPulse, fiber: &FiberSpec, sigma_filter: f64) -> f64 {
    (10.0 * std::f64::consts::LN_10).sqrt() * effective_width_sq(pulse, fiber, sigma_filter).sqrt()
}

/// Pair of spectra from which quadrature leakage ratios are computed.
///
/// A pump with zero peak power is replaced by a 1 W reference with γ = 0: the
/// ratio N_S/N_p is scale-free in that limit.
pub struct LeakageSpectra {
    pub input: SpectralField,
    pub output: SpectralField,
    n_pump: f64,
}

impl LeakageSpectra {
    pub fn compute(pulse: &PumpPulse, fiber: &FiberSpec, cfg: &PropagationConfig, model: SpectrumModel) -> Result<Self> {
        let (pulse, fiber) = if pulse.peak_power == 0.0 {
            (pulse.with_peak_power(1.0), FiberSpec { gamma: 0.0, ..*fiber })
        } else {
            (*pulse, *fiber)
        };
        let input = input_spectrum(&pulse, cfg)?;
        let output = match model {
            SpectrumModel::SpmOnly => spm_spectrum(&pulse, &fiber, cfg)?,
            SpectrumModel::SplitStep => split_step_propagate(&pulse, &fiber, cfg)?,
        };
        let n_pump = pump_photon_number(&input)?;
        Ok(Self { input, output, n_pump })
    }

    pub fn pump_photons(&self) -> f64 {
        self.n_pump
    }

    pub fn band_photons(&self, filter: &BandFilter) -> Result<f64> {
        spm_band_photons(&self.output, filter)
    }

    pub fn ratio(&self, filter: &BandFilter) -> Result<f64> {
        Ok(self.band_photons(filter)? / self.n_pump)
    }

    pub fn report(&self, filter: &BandFilter) -> Result<LeakageReport> {
        LeakageReport::from_counts(self.n_pump, self.band_photons(filter)?)
    }
}

/// Smallest detuning whose quadrature leakage ratio is below 1e-10, by
/// bisection over [0.5, 20] nm to 1e-3 nm.
pub fn min_detuning_numeric(
    pulse: &PumpPulse,
    fiber: &FiberSpec,
    filter_sigma: f64,
    cfg: &PropagationConfig,
    model: SpectrumModel,
    side: BandSide,
) -> Result<f64> {
    let spectra = LeakageSpectra::compute(pulse, fiber, cfg, model)?;
    let ratio_at = |d: f64| -> Result<f64> { spectra.ratio(&band_filter(pulse, d, filter_sigma, 1.0, side)?) };

    let (mut lo, mut hi) = DETUNING_BRACKET;
    let r_lo = ratio_at(lo)?;
    let r_hi = ratio_at(hi)?;
    if !(r_lo >= REJECTION_THRESHOLD && r_hi < REJECTION_THRESHOLD) {
        return Err(Error::Bracket {
            lower_nm: lo / NM,
            upper_nm: hi / NM,
            lower_ratio: r_lo,
            upper_ratio: r_hi,
        });
    }
    while hi - lo > DETUNING_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid)? < REJECTION_THRESHOLD {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
