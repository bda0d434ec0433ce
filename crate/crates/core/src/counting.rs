//! Gated photon-counting Monte Carlo.
//!
//! Each gate sees one pump pulse. Per pulse we draw integer photon numbers:
//! SFWM pairs (thermal, added to both bands), Raman per band (thermal) and
//! SPM per band (Poisson). Detection thins each photon independently, dark
//! events are OR-ed in, and dead time blanks the following gates of the
//! detector that clicked.
//!
//! Gates are split into fixed blocks of [`GATE_BLOCK`]. Block `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, so the ledger depends only
//! on the master seed and never on the number of workers. Dead time is applied
//! afterwards in a single sequential pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::leakage::{band_filter, BandSide, LeakageSpectra, SpectrumModel};
use crate::propagation::PropagationConfig;
use crate::units::{peak_power_from_average, FiberSpec, PulseTrain, PumpPulse};

pub const GATE_BLOCK: u64 = 1 << 16;

/// Mean photon numbers per pulse, before detection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub mu_pair: f64,
    pub mu_raman_s: f64,
    pub mu_raman_i: f64,
    pub mu_spm_s: f64,
    pub mu_spm_i: f64,
}

impl RateBreakdown {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("mu_pair", self.mu_pair),
            ("mu_raman_s", self.mu_raman_s),
            ("mu_raman_i", self.mu_raman_i),
            ("mu_spm_s", self.mu_spm_s),
            ("mu_spm_i", self.mu_spm_i),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return domain(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn signal_total(&self) -> f64 {
        self.mu_pair + self.mu_raman_s + self.mu_spm_s
    }

    pub fn idler_total(&self) -> f64 {
        self.mu_pair + self.mu_raman_i + self.mu_spm_i
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorSpec {
    /// Total detection efficiency (path and quantum).
    pub efficiency: f64,
    /// Dark-count probability per gate.
    pub dark_prob: f64,
    /// Hz
    pub gate_rate: f64,
    /// Gates are opened on one in `gate_decimation` pump pulses.
    pub gate_decimation: u32,
    /// s
    pub dead_time: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            efficiency: 0.02,
            dark_prob: 1e-5,
            gate_rate: 1.29e6,
            gate_decimation: 32,
            dead_time: 10e-6,
        }
    }
}

impl DetectorSpec {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_prob: 0.0,
            dead_time: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return domain(format!("efficiency must be in [0, 1], got {}", self.efficiency));
        }
        if !(0.0..=1.0).contains(&self.dark_prob) {
            return domain(format!("dark probability must be in [0, 1], got {}", self.dark_prob));
        }
        if !(self.gate_rate > 0.0) {
            return domain(format!("gate rate must be > 0, got {}", self.gate_rate));
        }
        if self.gate_decimation == 0 {
            return domain("gate decimation must be >= 1");
        }
        if !(self.dead_time >= 0.0) || !self.dead_time.is_finite() {
            return domain(format!("dead time must be >= 0, got {}", self.dead_time));
        }
        Ok(())
    }

    /// Gates skipped after a click: ⌈dead_time·gate_rate⌉.
    pub fn dead_gates(&self) -> u64 {
        let x = self.dead_time * self.gate_rate;
        // absorb rounding in products such as 1e-6·1e6
        (x * (1.0 - 1e-12)).ceil().max(0.0) as u64
    }

    /// Pump repetition rate implied by the gate rate and decimation.
    pub fn pulse_rate(&self) -> f64 {
        self.gate_rate * self.gate_decimation as f64
    }
}

/// Per-gate detection record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateLedger {
    pub n_gates: u64,
    /// Sorted gate indices with a signal click.
    pub signal_hits: Vec<u64>,
    /// Sorted gate indices with an idler click.
    pub idler_hits: Vec<u64>,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceStats {
    pub singles_s: u64,
    pub singles_i: u64,
    /// Same-gate coincidences.
    pub c_c: u64,
    /// Signal at gate g with idler at gate g+1.
    pub c_a: u64,
    /// (C_c − C_a)/C_a; `None` when C_a = 0.
    pub tar: Option<f64>,
    pub n_gates: u64,
}

impl CoincidenceStats {
    pub fn true_coincidences(&self) -> i64 {
        self.c_c as i64 - self.c_a as i64
    }

    /// Standard error of the TAR from Poisson errors on C_c and C_a.
    pub fn tar_std_error(&self) -> Option<f64> {
        if self.c_a == 0 {
            return None;
        }
        let cc = self.c_c as f64;
        let ca = self.c_a as f64;
        // R = Cc/Ca − 1, var = Cc/Ca² + Cc²/Ca³
        Some((cc / (ca * ca) + cc * cc / (ca * ca * ca)).sqrt())
    }
}

/// Draws thermal (Bose-Einstein) photon numbers by inverting the geometric CDF.
#[derive(Debug, Clone, Copy)]
struct Thermal {
    log_ratio: f64,
}

impl Thermal {
    fn new(mean: f64) -> Option<Self> {
        (mean > 0.0).then(|| Self {
            log_ratio: (mean / (1.0 + mean)).ln(),
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // P(n ≥ k) = (μ/(1+μ))^k
        let u: f64 = 1.0 - rng.gen::<f64>();
        (u.ln() / self.log_ratio).floor() as u64
    }
}

fn draw_thermal<R: Rng + ?Sized>(d: &Option<Thermal>, rng: &mut R) -> u64 {
    d.as_ref().map_or(0, |t| t.sample(rng))
}

fn draw_poisson<R: Rng + ?Sized>(d: &Option<Poisson<f64>>, rng: &mut R) -> u64 {
    d.as_ref().map_or(0, |p| p.sample(rng) as u64)
}

/// Reusable per-pulse photon sampler for one [`RateBreakdown`].
#[derive(Debug, Clone)]
pub struct PulseSampler {
    pair: Option<Thermal>,
    raman_s: Option<Thermal>,
    raman_i: Option<Thermal>,
    spm_s: Option<Poisson<f64>>,
    spm_i: Option<Poisson<f64>>,
}

impl PulseSampler {
    pub fn new(rates: &RateBreakdown) -> Result<Self> {
        rates.validate()?;
        let poisson = |mu: f64| -> Result<Option<Poisson<f64>>> {
            if mu > 0.0 {
                Poisson::new(mu)
                    .map(Some)
                    .map_err(|e| Error::Domain(format!("poisson mean {mu}: {e}")))
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            pair: Thermal::new(rates.mu_pair),
            raman_s: Thermal::new(rates.mu_raman_s),
            raman_i: Thermal::new(rates.mu_raman_i),
            spm_s: poisson(rates.mu_spm_s)?,
            spm_i: poisson(rates.mu_spm_i)?,
        })
    }

    /// (signal, idler) photon numbers for one pulse.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let pairs = draw_thermal(&self.pair, rng);
        let s = pairs + draw_thermal(&self.raman_s, rng) + draw_poisson(&self.spm_s, rng);
        let i = pairs + draw_thermal(&self.raman_i, rng) + draw_poisson(&self.spm_i, rng);
        (s, i)
    }

    /// Per-process draw, for statistics checks: (pairs, raman_s, raman_i, spm_s, spm_i).
    pub fn draw_components<R: Rng + ?Sized>(&self, rng: &mut R) -> [u64; 5] {
        [
            draw_thermal(&self.pair, rng),
            draw_thermal(&self.raman_s, rng),
            draw_thermal(&self.raman_i, rng),
            draw_poisson(&self.spm_s, rng),
            draw_poisson(&self.spm_i, rng),
        ]
    }
}

/// One pulse worth of photons: thermal pairs into both bands, thermal Raman and
/// Poissonian SPM per band, all independent.
pub fn draw_pulse_photons<R: Rng + ?Sized>(rates: &RateBreakdown, rng: &mut R) -> Result<(u64, u64)> {
    Ok(PulseSampler::new(rates)?.draw(rng))
}

/// RNG for gate block `block` under master seed `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[inline]
fn clicks<R: Rng + ?Sized>(photons: u64, det: &DetectorSpec, rng: &mut R) -> bool {
    // P(no click) = (1−η)^n·(1−dark)
    let miss = if photons == 0 {
        1.0
    } else {
        (1.0 - det.efficiency).powi(photons.min(i32::MAX as u64) as i32)
    } * (1.0 - det.dark_prob);
    if miss >= 1.0 {
        return false;
    }
    rng.gen::<f64>() >= miss
}

fn simulate_block(
    sampler: &PulseSampler,
    det_s: &DetectorSpec,
    det_i: &DetectorSpec,
    seed: u64,
    block: u64,
    n_gates: u64,
) -> (Vec<u64>, Vec<u64>) {
    let mut rng = block_rng(seed, block);
    let start = block * GATE_BLOCK;
    let end = (start + GATE_BLOCK).min(n_gates);
    let mut s_hits = Vec::new();
    let mut i_hits = Vec::new();
    for g in start..end {
        let (ns, ni) = sampler.draw(&mut rng);
        if clicks(ns, det_s, &mut rng) {
            s_hits.push(g);
        }
        if clicks(ni, det_i, &mut rng) {
            i_hits.push(g);
        }
    }
    (s_hits, i_hits)
}

/// Drops clicks that land within `dead` gates after an accepted click.
fn apply_dead_time(raw: Vec<u64>, dead: u64) -> Vec<u64> {
    if dead == 0 {
        return raw;
    }
    let mut out = Vec::with_capacity(raw.len());
    let mut armed_from = 0u64;
    for g in raw {
        if g >= armed_from {
            out.push(g);
            armed_from = g + dead + 1;
        }
    }
    out
}

/// Simulates `n_gates` gates on the current rayon pool.
pub fn simulate_gates(
    rates: &RateBreakdown,
    det_s: &DetectorSpec,
    det_i: &DetectorSpec,
    n_gates: u64,
    seed: u64,
) -> Result<GateLedger> {
    if n_gates == 0 {
        return domain("n_gates must be >= 1");
    }
    det_s.validate()?;
    det_i.validate()?;
    let sampler = PulseSampler::new(rates)?;
    let n_blocks = n_gates.div_ceil(GATE_BLOCK);
    let blocks: Vec<(Vec<u64>, Vec<u64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| simulate_block(&sampler, det_s, det_i, seed, b, n_gates))
        .collect();

    let mut raw_s = Vec::new();
    let mut raw_i = Vec::new();
    for (s, i) in blocks {
        raw_s.extend(s);
        raw_i.extend(i);
    }
    Ok(GateLedger {
        n_gates,
        signal_hits: apply_dead_time(raw_s, det_s.dead_gates()),
        idler_hits: apply_dead_time(raw_i, det_i.dead_gates()),
        rng_seed: seed,
    })
}

/// [`simulate_gates`] on a dedicated pool of `workers` threads.
pub fn simulate_gates_with_workers(
    rates: &RateBreakdown,
    det_s: &DetectorSpec,
    det_i: &DetectorSpec,
    n_gates: u64,
    seed: u64,
    workers: usize,
) -> Result<GateLedger> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| simulate_gates(rates, det_s, det_i, n_gates, seed))
}

fn count_common(a: &[u64], b: &[u64], offset: u64) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let x = a[i] + offset;
        match x.cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub fn coincidences(ledger: &GateLedger) -> Result<CoincidenceStats> {
    if ledger.n_gates < 2 {
        return domain("coincidence analysis needs at least 2 gates");
    }
    let c_c = count_common(&ledger.signal_hits, &ledger.idler_hits, 0);
    let c_a = count_common(&ledger.signal_hits, &ledger.idler_hits, 1);
    let tar = (c_a > 0).then(|| (c_c as f64 - c_a as f64) / c_a as f64);
    Ok(CoincidenceStats {
        singles_s: ledger.signal_hits.len() as u64,
        singles_i: ledger.idler_hits.len() as u64,
        c_c,
        c_a,
        tar,
        n_gates: ledger.n_gates,
    })
}

/// Per-gate probabilities without dead time, from photon-number generating functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedStats {
    pub p_signal: f64,
    pub p_idler: f64,
    pub p_coincidence: f64,
    pub p_accidental: f64,
    pub tar: f64,
}

/// Closed-form click probabilities: E[x^n] is 1/(1+μ(1−x)) for thermal and
/// exp(−μ(1−x)) for Poisson light.
pub fn expected_stats(rates: &RateBreakdown, det_s: &DetectorSpec, det_i: &DetectorSpec) -> ExpectedStats {
    let (es, ei) = (det_s.efficiency, det_i.efficiency);
    let thermal = |mu: f64, eta: f64| 1.0 / (1.0 + mu * eta);
    let poisson = |mu: f64, eta: f64| (-mu * eta).exp();
    let q_s = (1.0 - det_s.dark_prob)
        * thermal(rates.mu_pair, es)
        * thermal(rates.mu_raman_s, es)
        * poisson(rates.mu_spm_s, es);
    let q_i = (1.0 - det_i.dark_prob)
        * thermal(rates.mu_pair, ei)
        * thermal(rates.mu_raman_i, ei)
        * poisson(rates.mu_spm_i, ei);
    let pair_both = 1.0 - (1.0 - es) * (1.0 - ei);
    let q_si = (1.0 - det_s.dark_prob)
        * (1.0 - det_i.dark_prob)
        * thermal(rates.mu_pair, pair_both)
        * thermal(rates.mu_raman_s, es)
        * thermal(rates.mu_raman_i, ei)
        * poisson(rates.mu_spm_s, es)
        * poisson(rates.mu_spm_i, ei);
    let p_signal = 1.0 - q_s;
    let p_idler = 1.0 - q_i;
    let p_coincidence = 1.0 - q_s - q_i + q_si;
    let p_accidental = p_signal * p_idler;
    ExpectedStats {
        p_signal,
        p_idler,
        p_coincidence,
        p_accidental,
        tar: (p_coincidence - p_accidental) / p_accidental,
    }
}

/// Per-band scattering strengths, photons per pulse before detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    /// Raman, photons/pulse per W of average power, signal band.
    pub s1_signal: f64,
    /// Raman, idler band.
    pub s1_idler: f64,
    /// SFWM pairs/pulse per W².
    pub s2: f64,
    /// Multiplier on the modeled SPM leakage (stands in for the real filter's
    /// out-of-band floor and spectral shoulders the Gaussian model misses).
    pub spm_scale: f64,
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s1_signal", self.s1_signal),
            ("s1_idler", self.s1_idler),
            ("s2", self.s2),
            ("spm_scale", self.spm_scale),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return domain(format!("calibration {name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Pump, fiber and filter description from which SPM leakage is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceModel {
    /// Shape of the pump; its peak power is replaced per average power.
    pub pump: PumpPulse,
    pub repetition_rate: f64,
    pub fiber: FiberSpec,
    pub filter_sigma: f64,
    pub filter_peak_transmission: f64,
    /// Pump-to-band detuning in wavelength, m.
    pub detuning: f64,
    pub model: SpectrumModel,
    /// Grid; `None` uses the default for each pulse.
    pub grid: Option<PropagationConfig>,
}

impl SourceModel {
    pub fn pulse_at(&self, average_power: f64) -> Result<PumpPulse> {
        let train = PulseTrain::new(self.repetition_rate, average_power)?;
        let peak = peak_power_from_average(&train, self.pump.t0)?;
        Ok(self.pump.with_peak_power(peak))
    }

    /// SPM photons per pulse in the (signal, idler) bands at this average power.
    pub fn spm_photons(&self, average_power: f64) -> Result<(f64, f64)> {
        if average_power == 0.0 {
            return Ok((0.0, 0.0));
        }
        let pulse = self.pulse_at(average_power)?;
        let cfg = self
            .grid
            .unwrap_or_else(|| PropagationConfig::for_pulse(&pulse, &self.fiber));
        let spectra = LeakageSpectra::compute(&pulse, &self.fiber, &cfg, self.model)?;
        let band = |side| -> Result<f64> {
            let f = band_filter(&pulse, self.detuning, self.filter_sigma, self.filter_peak_transmission, side)?;
            spectra.band_photons(&f)
        };
        Ok((band(BandSide::Signal)?, band(BandSide::Idler)?))
    }
}

/// μ_pair = s2·P², μ_raman = s1·P, μ_spm = spm_scale × modeled band leakage.
pub fn rates_from_physics(source: &SourceModel, average_power: f64, calibration: &Calibration) -> Result<RateBreakdown> {
    calibration.validate()?;
    if !(average_power >= 0.0) {
        return domain(format!("average power must be >= 0, got {average_power}"));
    }
    let (spm_s, spm_i) = source.spm_photons(average_power)?;
    Ok(RateBreakdown {
        mu_pair: calibration.s2 * average_power * average_power,
        mu_raman_s: calibration.s1_signal * average_power,
        mu_raman_i: calibration.s1_idler * average_power,
        mu_spm_s: calibration.spm_scale * spm_s,
        mu_spm_i: calibration.spm_scale * spm_i,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::NM;

    fn rates(mu_pair: f64) -> RateBreakdown {
        RateBreakdown {
            mu_pair,
            ..Default::default()
        }
    }

    #[test]
    fn zero_means_draw_nothing() {
        let mut rng = block_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(draw_pulse_photons(&RateBreakdown::default(), &mut rng).unwrap(), (0, 0));
        }
    }

    #[test]
    fn pairs_land_in_both_bands() {
        let sampler = PulseSampler::new(&rates(0.1)).unwrap();
        let mut rng = block_rng(7, 0);
        let mut total = 0u64;
        let n = 1_000_000;
        for _ in 0..n {
            let (s, i) = sampler.draw(&mut rng);
            assert_eq!(s, i);
            total += s;
        }
        let mean = total as f64 / n as f64;
        // thermal variance μ(1+μ)
        let se = (0.1 * 1.1 / n as f64).sqrt();
        assert!((mean - 0.1).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn negative_rates_rejected() {
        let bad = RateBreakdown {
            mu_spm_s: -1.0,
            ..Default::default()
        };
        assert!(PulseSampler::new(&bad).is_err());
    }

    #[test]
    fn blind_detectors_record_nothing() {
        let det = DetectorSpec {
            efficiency: 0.0,
            dark_prob: 0.0,
            ..DetectorSpec::default()
        };
        let ledger = simulate_gates(&rates(0.5), &det, &det, 100_000, 3).unwrap();
        assert!(ledger.signal_hits.is_empty() && ledger.idler_hits.is_empty());
    }

    #[test]
    fn dead_gates_rounding() {
        assert_eq!(DetectorSpec::default().dead_gates(), 13);
        let exact = DetectorSpec {
            dead_time: 1e-6,
            gate_rate: 1e6,
            ..DetectorSpec::default()
        };
        assert_eq!(exact.dead_gates(), 1);
        assert_eq!(DetectorSpec::ideal().dead_gates(), 0);
    }

    #[test]
    fn dead_time_filter() {
        assert_eq!(apply_dead_time(vec![0, 1, 2, 3, 5, 6, 9], 2), vec![0, 3, 6, 9]);
        assert_eq!(apply_dead_time(vec![4, 5], 0), vec![4, 5]);
    }

    #[test]
    fn every_gate_hit() {
        let ledger = GateLedger {
            n_gates: 10,
            signal_hits: (0..10).collect(),
            idler_hits: (0..10).collect(),
            rng_seed: 0,
        };
        let stats = coincidences(&ledger).unwrap();
        assert_eq!(stats.c_c, 10);
        assert_eq!(stats.c_a, 9);
        assert_eq!(stats.tar, Some(1.0 / 9.0));
    }

    #[test]
    fn tar_undefined_without_accidentals() {
        let ledger = GateLedger {
            n_gates: 10,
            signal_hits: vec![2],
            idler_hits: vec![2],
            rng_seed: 0,
        };
        let stats = coincidences(&ledger).unwrap();
        assert_eq!(stats.c_a, 0);
        assert_eq!(stats.tar, None);
        assert_eq!(stats.tar_std_error(), None);
        let short = GateLedger { n_gates: 1, ..ledger };
        assert!(coincidences(&short).is_err());
    }

    #[test]
    fn singles_match_thinned_thermal() {
        let det = DetectorSpec {
            efficiency: 0.02,
            dark_prob: 0.0,
            dead_time: 0.0,
            ..DetectorSpec::default()
        };
        let n = 10_000_000u64;
        let ledger = simulate_gates(&rates(0.1), &det, &det, n, 11).unwrap();
        // 1 − E[(1−η)^n] = 1 − 1/(1+μη)
        let p: f64 = 1.0 - 1.0 / (1.0 + 0.1 * 0.02);
        assert!((p - 0.002).abs() < 1e-5);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for hits in [&ledger.signal_hits, &ledger.idler_hits] {
            let rate = hits.len() as f64 / n as f64;
            assert!((rate - p).abs() < 3.0 * se, "{rate} vs {p}");
        }
    }

    #[test]
    fn same_seed_same_ledger() {
        let r = RateBreakdown {
            mu_pair: 0.05,
            mu_raman_s: 0.02,
            mu_raman_i: 0.03,
            mu_spm_s: 0.01,
            mu_spm_i: 0.01,
        };
        let det = DetectorSpec {
            efficiency: 0.3,
            ..DetectorSpec::default()
        };
        let a = simulate_gates_with_workers(&r, &det, &det, 300_000, 42, 1).unwrap();
        let b = simulate_gates_with_workers(&r, &det, &det, 300_000, 42, 4).unwrap();
        assert_eq!(a, b);
        let c = simulate_gates_with_workers(&r, &det, &det, 300_000, 43, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn expected_stats_pure_pairs() {
        let st = expected_stats(&rates(0.01), &DetectorSpec::ideal(), &DetectorSpec::ideal());
        assert!((st.tar - 100.0).abs() < 1e-9, "{}", st.tar);
    }

    fn source(detuning_nm: f64) -> SourceModel {
        SourceModel {
            pump: PumpPulse::from_spectral_fwhm(1.0, 0.95 * NM, 1538e-9).unwrap(),
            repetition_rate: 41e6,
            fiber: FiberSpec::new(300.0, 2e-3, 1537e-9, 0.0).unwrap(),
            filter_sigma: 0.39 * NM,
            filter_peak_transmission: 1.0,
            detuning: detuning_nm * NM,
            model: SpectrumModel::SpmOnly,
            grid: None,
        }
    }

    #[test]
    fn rates_polynomial_form() {
        let cal = Calibration {
            s1_signal: 100.0,
            s1_idler: 120.0,
            s2: 1e6,
            spm_scale: 1.0,
        };
        let zero = rates_from_physics(&source(4.4), 0.0, &cal).unwrap();
        assert_eq!(zero, RateBreakdown::default());
        let a = rates_from_physics(&source(4.4), 0.1e-3, &cal).unwrap();
        let b = rates_from_physics(&source(4.4), 0.2e-3, &cal).unwrap();
        assert!((b.mu_pair / a.mu_pair - 4.0).abs() < 1e-12);
        assert!((b.mu_raman_i / a.mu_raman_i - 2.0).abs() < 1e-12);
        assert!(b.mu_spm_i > a.mu_spm_i);
        let bad = Calibration { s2: -1.0, ..cal };
        assert!(rates_from_physics(&source(4.4), 0.1e-3, &bad).is_err());
    }
}
