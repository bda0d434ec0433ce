//! Fits used to decompose measured counting rates.

use std::f64::consts::PI;

use serde::Serialize;

use crate::counting::{DetectorSpec, RateBreakdown};
use crate::error::{domain, Error, Result};
use crate::leakage::BandSide;

/// Counting rate recorded while the relative pump phase φ is scanned.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    /// rad
    pub phases: Vec<f64>,
    /// counts/s
    pub counts: Vec<f64>,
    /// Per-point standard error; Poisson weights are used when absent.
    pub counts_err: Option<Vec<f64>>,
}

impl FringeScan {
    pub const MIN_POINTS: usize = 6;
    pub const MIN_SPAN: f64 = 1.5 * PI;

    pub fn validate(&self) -> Result<()> {
        if self.phases.len() != self.counts.len() {
            return domain("phases and counts differ in length");
        }
        if let Some(err) = &self.counts_err {
            if err.len() != self.counts.len() {
                return domain("counts_err differs in length from counts");
            }
            if err.iter().any(|e| !(*e > 0.0)) {
                return domain("counts_err entries must be > 0");
            }
        }
        if self.counts.iter().any(|c| !(*c >= 0.0)) {
            return domain("counts must be >= 0");
        }
        if self.phases.len() < Self::MIN_POINTS {
            return Err(Error::IllConditioned(format!(
                "fringe scan needs at least {} points, got {}",
                Self::MIN_POINTS,
                self.phases.len()
            )));
        }
        let lo = self.phases.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.phases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi - lo >= Self::MIN_SPAN) {
            return Err(Error::IllConditioned(format!(
                "phase span {:.3} rad below 1.5π",
                hi - lo
            )));
        }
        Ok(())
    }
}

/// N(φ) = baseline + fringe_amp·(1 + cos(φ + phase_offset)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    /// N_F + N_R
    pub baseline: f64,
    /// N_S
    pub fringe_amp: f64,
    pub phase_offset: f64,
    /// fringe_amp / (baseline + fringe_amp)
    pub visibility: f64,
    pub residual_rms: f64,
    pub baseline_err: f64,
    pub fringe_amp_err: f64,
    /// Set when a negative baseline was clipped to zero.
    pub baseline_clipped: bool,
}

/// Solves a symmetric positive-definite system with Cholesky; also returns the inverse.
#[allow(clippy::needless_range_loop)]
fn solve_spd<const N: usize>(a: [[f64; N]; N], b: [f64; N]) -> Option<([f64; N], [[f64; N]; N])> {
    let mut l = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let forward_back = |rhs: [f64; N]| {
        let mut y = [0.0; N];
        for i in 0..N {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = [0.0; N];
        for i in (0..N).rev() {
            let mut s = y[i];
            for k in i + 1..N {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        x
    };
    let x = forward_back(b);
    let mut inv = [[0.0; N]; N];
    for j in 0..N {
        let mut e = [0.0; N];
        e[j] = 1.0;
        let col = forward_back(e);
        for i in 0..N {
            inv[i][j] = col[i];
        }
    }
    Some((x, inv))
}

fn condition_ok<const N: usize>(a: &[[f64; N]; N], inv: &[[f64; N]; N]) -> bool {
    let norm = |m: &[[f64; N]; N]| {
        m.iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    norm(a) * norm(inv) < 1e12
}

/// Weighted linear least squares on `[1, cos φ, sin φ]`, then
/// B = √(C²+S²), A = A′ − B, φ0 = atan2(−S, C).
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    scan.validate()?;
    let weights: Vec<f64> = match &scan.counts_err {
        Some(err) => err.iter().map(|e| 1.0 / (e * e)).collect(),
        None => scan.counts.iter().map(|c| 1.0 / c.max(1.0)).collect(),
    };

    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for ((phi, y), w) in scan.phases.iter().zip(&scan.counts).zip(&weights) {
        let row = [1.0, phi.cos(), phi.sin()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
            atb[i] += w * row[i] * y;
        }
    }
    let (x, cov) = solve_spd(ata, atb)
        .filter(|(_, inv)| condition_ok(&ata, inv))
        .ok_or_else(|| Error::IllConditioned("fringe normal equations are singular".into()))?;
    let [offset, c, s] = x;
    let amp = c.hypot(s);
    let phase_offset = (-s).atan2(c);

    // delta method; the amplitude is undefined in direction at B = 0
    let amp_var = if amp > 1e-12 * offset.abs().max(1.0) {
        (c * c * cov[1][1] + s * s * cov[2][2] + 2.0 * c * s * cov[1][2]) / (amp * amp)
    } else {
        0.5 * (cov[1][1] + cov[2][2])
    };
    let (dc, ds) = if amp > 0.0 { (c / amp, s / amp) } else { (0.0, 0.0) };
    // A = A′ − B
    let base_var = cov[0][0] + amp_var - 2.0 * (dc * cov[0][1] + ds * cov[0][2]);

    let mut baseline = offset - amp;
    let baseline_clipped = baseline < 0.0;
    if baseline_clipped {
        baseline = 0.0;
    }
    let total = baseline + amp;
    let visibility = if total > 0.0 { amp / total } else { 0.0 };

    let n = scan.counts.len() as f64;
    let rss: f64 = scan
        .phases
        .iter()
        .zip(&scan.counts)
        .map(|(phi, y)| {
            let model = offset + c * phi.cos() + s * phi.sin();
            (y - model).powi(2)
        })
        .sum();

    Ok(FringeFit {
        baseline,
        fringe_amp: amp,
        phase_offset,
        visibility,
        residual_rms: (rss / n).sqrt(),
        baseline_err: base_var.max(0.0).sqrt(),
        fringe_amp_err: amp_var.max(0.0).sqrt(),
        baseline_clipped,
    })
}

/// baseline(P) = s1·P + s2·P².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// counts/s per W
    pub s1: f64,
    /// counts/s per W²
    pub s2: f64,
    pub covariance: [[f64; 2]; 2],
    pub residual_rms: f64,
}

impl PowerLawFit {
    pub fn s1_err(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn s2_err(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn evaluate(&self, power: f64) -> f64 {
        self.s1 * power + self.s2 * power * power
    }
}

/// Non-negative least squares of `baselines` on the columns [P, P²].
///
/// With `errors` the fit is weighted by 1/σ² and the covariance is (XᵀWX)⁻¹;
/// otherwise it is unweighted and the covariance is scaled by the residual
/// variance.
pub fn fit_power_law(powers: &[f64], baselines: &[f64], errors: Option<&[f64]>) -> Result<PowerLawFit> {
    if powers.len() != baselines.len() {
        return domain("powers and baselines differ in length");
    }
    if let Some(e) = errors {
        if e.len() != powers.len() {
            return domain("errors differ in length from powers");
        }
        if e.iter().any(|v| !(*v > 0.0)) {
            return domain("errors must be > 0");
        }
    }
    if powers.iter().any(|p| !(*p >= 0.0)) {
        return domain("powers must be >= 0");
    }
    let mut distinct: Vec<f64> = powers.iter().copied().filter(|p| *p > 0.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 || powers.len() < 3 {
        return Err(Error::IllConditioned(
            "power fit needs at least 3 points with 2 distinct nonzero powers".into(),
        ));
    }
    let weights: Vec<f64> = match errors {
        Some(e) => e.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; powers.len()],
    };

    let mut ata = [[0.0; 2]; 2];
    let mut atb = [0.0; 2];
    for ((p, y), w) in powers.iter().zip(baselines).zip(&weights) {
        let row = [*p, p * p];
        for i in 0..2 {
            for j in 0..2 {
                ata[i][j] += w * row[i] * row[j];
            }
            atb[i] += w * row[i] * y;
        }
    }
    let (x, inv) = solve_spd(ata, atb)
        .filter(|(_, inv)| condition_ok(&ata, inv))
        .ok_or_else(|| Error::IllConditioned("power-law design is rank deficient".into()))?;

    let wrss = |s1: f64, s2: f64| -> f64 {
        powers
            .iter()
            .zip(baselines)
            .zip(&weights)
            .map(|((p, y), w)| w * (y - s1 * p - s2 * p * p).powi(2))
            .sum()
    };

    // Two-variable NNLS: the optimum is interior or on one of the axes.
    let (s1, s2) = if x[0] >= 0.0 && x[1] >= 0.0 {
        (x[0], x[1])
    } else {
        let only_s1 = (atb[0] / ata[0][0]).max(0.0);
        let only_s2 = (atb[1] / ata[1][1]).max(0.0);
        if wrss(only_s1, 0.0) <= wrss(0.0, only_s2) {
            (only_s1, 0.0)
        } else {
            (0.0, only_s2)
        }
    };

    let n = powers.len() as f64;
    let rss: f64 = powers
        .iter()
        .zip(baselines)
        .map(|(p, y)| (y - s1 * p - s2 * p * p).powi(2))
        .sum();
    let scale = if errors.is_some() { 1.0 } else { wrss(s1, s2) / (n - 2.0).max(1.0) };
    let covariance = [
        [inv[0][0] * scale, inv[0][1] * scale],
        [inv[1][0] * scale, inv[1][1] * scale],
    ];
    Ok(PowerLawFit {
        s1,
        s2,
        covariance,
        residual_rms: (rss / n).sqrt(),
    })
}

/// Expectation-level counting rates of one band with equal-power arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeModel {
    /// SFWM, counts/s
    pub n_f: f64,
    /// Raman, counts/s
    pub n_r: f64,
    /// SPM from one arm, counts/s
    pub n_s: f64,
    /// Attenuated-pump monitor rate per arm, K·N_p, counts/s
    pub n_p: f64,
}

/// Default monitor attenuation K: pump photons per gate reaching the monitor detector.
pub const DEFAULT_MONITOR_SCALE: f64 = 1e-9;

impl FringeModel {
    /// Rates for one band: gate rate × efficiency × mean photons per pulse,
    /// and `monitor_scale · pump_photons · gate_rate` for the pump monitor.
    pub fn from_rates(
        rates: &RateBreakdown,
        band: BandSide,
        detector: &DetectorSpec,
        pump_photons_per_pulse: f64,
        monitor_scale: f64,
    ) -> Self {
        let k = detector.gate_rate * detector.efficiency;
        let (raman, spm) = match band {
            BandSide::Signal => (rates.mu_raman_s, rates.mu_spm_s),
            BandSide::Idler => (rates.mu_raman_i, rates.mu_spm_i),
        };
        Self {
            n_f: k * rates.mu_pair,
            n_r: k * raman,
            n_s: k * spm,
            n_p: monitor_scale * pump_photons_per_pulse * detector.gate_rate,
        }
    }

    pub fn spm_fraction(&self) -> f64 {
        let total = self.n_f + self.n_r + self.n_s;
        if total > 0.0 {
            self.n_s / total
        } else {
            0.0
        }
    }
}

/// (n_t, n_p) at relative phase φ: N_F + N_R + N_S(1+cos φ) and K·N_p(1+cos φ).
pub fn fringe_expectation(model: &FringeModel, phase: f64) -> (f64, f64) {
    let fringe = 1.0 + phase.cos();
    (model.n_f + model.n_r + model.n_s * fringe, model.n_p * fringe)
}
