//! Scenario configuration.
//!
//! A TOML file with sections `pump`, `fiber`, `filter`, `grid`, `propagation`,
//! `detector`, `calibration`, `rates`, `run`, `sweep`, `tar` and `monitor`.
//! Every physical key carries its unit in the name (`pump.fwhm_nm`,
//! `pump.avg_power_mW`). Unknown keys and type errors are collected and
//! reported together with their dotted key paths.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::analysis::DEFAULT_MONITOR_SCALE;
use crate::counting::{Calibration, DetectorSpec, RateBreakdown, SourceModel};
use crate::error::{ConfigIssue, Error, Result};
use crate::leakage::SpectrumModel;
use crate::propagation::PropagationConfig;
use crate::units::{beta2_from_dispersion_slope, fwhm_to_sigma, FiberSpec, PumpPulse, MHZ, MW, NM, PS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PumpSection {
    pub center_wavelength_nm: f64,
    pub fwhm_nm: f64,
    /// Overrides `fwhm_nm` when set.
    pub t0_ps: Option<f64>,
    #[serde(rename = "avg_power_mW")]
    pub avg_power_mw: f64,
    #[serde(rename = "repetition_rate_MHz")]
    pub repetition_rate_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberSection {
    pub length_m: f64,
    #[serde(rename = "gamma_per_W_km")]
    pub gamma_per_w_km: f64,
    pub zero_dispersion_wavelength_nm: f64,
    pub dispersion_slope_ps_per_nm2_km: f64,
    /// Overrides the slope-derived β2 when set.
    pub beta2_ps2_per_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSection {
    pub fwhm_nm: f64,
    pub peak_transmission: f64,
    pub detuning_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub n_points: usize,
    pub time_window_t0: f64,
    pub n_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub dark_prob: f64,
    #[serde(rename = "gate_rate_MHz")]
    pub gate_rate_mhz: f64,
    pub gate_decimation: u32,
    pub dead_time_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSection {
    #[serde(rename = "s1_signal_per_mW")]
    pub s1_signal_per_mw: f64,
    #[serde(rename = "s1_idler_per_mW")]
    pub s1_idler_per_mw: f64,
    #[serde(rename = "s2_per_mW2")]
    pub s2_per_mw2: f64,
    pub spm_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub n_gates: u64,
    pub seed: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    #[serde(rename = "power_min_mW")]
    pub power_min_mw: f64,
    #[serde(rename = "power_max_mW")]
    pub power_max_mw: f64,
    pub n_points: usize,
    pub pump_fwhm_nm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TarSection {
    #[serde(rename = "powers_mW")]
    pub powers_mw: Vec<f64>,
    pub detunings_nm: Vec<f64>,
    /// One Raman coefficient per detuning.
    #[serde(rename = "s1_signal_per_mW")]
    pub s1_signal_per_mw: Vec<f64>,
    #[serde(rename = "s1_idler_per_mW")]
    pub s1_idler_per_mw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub pump: PumpSection,
    pub fiber: FiberSection,
    pub filter: FilterSection,
    pub grid: GridSection,
    pub propagation_method: SpectrumModel,
    pub detector: DetectorSection,
    pub calibration: Option<CalibrationSection>,
    pub rates: Option<RateBreakdown>,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub tar: Option<TarSection>,
    pub monitor_scale: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::from_toml_str("").expect("defaults are valid")
    }
}

/// Flattened key lookup that records which keys were consumed and what went wrong.
struct Reader {
    entries: BTreeMap<String, toml::Value>,
    used: BTreeSet<String>,
    issues: Vec<ConfigIssue>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

impl Reader {
    fn new(table: &toml::Table) -> Self {
        let mut entries = BTreeMap::new();
        flatten("", table, &mut entries);
        Self {
            entries,
            used: BTreeSet::new(),
            issues: Vec::new(),
        }
    }

    fn issue(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    fn take(&mut self, key: &str) -> Option<toml::Value> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn as_f64(v: &toml::Value) -> Option<f64> {
        match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.take(key)?;
        match Self::as_f64(&v) {
            Some(f) if f.is_finite() => Some(f),
            _ => {
                self.issue(key, format!("expected a finite number, got {v}"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or(default)
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.f64(key, default);
        if !(v > 0.0) {
            self.issue(key, format!("must be > 0, got {v}"));
        }
        v
    }

    fn non_negative(&mut self, key: &str, default: f64) -> f64 {
        let v = self.f64(key, default);
        if !(v >= 0.0) {
            self.issue(key, format!("must be >= 0, got {v}"));
        }
        v
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        let v = self.take(key)?;
        match v {
            toml::Value::Integer(i) if i >= 0 => Some(i as u64),
            // allow 1e7-style counts
            toml::Value::Float(f) if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 => Some(f as u64),
            other => {
                self.issue(key, format!("expected a non-negative integer, got {other}"));
                None
            }
        }
    }

    fn u64(&mut self, key: &str, default: u64) -> u64 {
        self.opt_u64(key).unwrap_or(default)
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        match self.take(key) {
            None => default.to_string(),
            Some(toml::Value::String(s)) => s,
            Some(other) => {
                self.issue(key, format!("expected a string, got {other}"));
                default.to_string()
            }
        }
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        match self.take(key) {
            None => default.to_vec(),
            Some(toml::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match Self::as_f64(item) {
                        Some(f) if f.is_finite() => out.push(f),
                        _ => self.issue(&format!("{key}[{i}]"), format!("expected a number, got {item}")),
                    }
                }
                out
            }
            Some(other) => {
                self.issue(key, format!("expected an array of numbers, got {other}"));
                default.to_vec()
            }
        }
    }

    fn finish(mut self) -> Result<()> {
        let unknown: Vec<String> = self
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        for k in unknown {
            self.issue(&k, "unknown key");
        }
        if self.issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.issues))
        }
    }
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let has_content = text
            .lines()
            .map(str::trim)
            .any(|l| !l.is_empty() && !l.starts_with('#'));
        if !has_content {
            return Err(Error::Config(vec![ConfigIssue {
                key: "<document>".into(),
                message: format!("{} is empty", path.display()),
            }]));
        }
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Config(vec![ConfigIssue {
                key: "<document>".into(),
                message: e.message().to_string(),
            }])
        })?;
        let mut r = Reader::new(&table);

        let pump = PumpSection {
            center_wavelength_nm: r.positive("pump.center_wavelength_nm", 1538.0),
            fwhm_nm: r.positive("pump.fwhm_nm", 0.95),
            t0_ps: r.opt_f64("pump.t0_ps"),
            avg_power_mw: r.non_negative("pump.avg_power_mW", 0.19),
            repetition_rate_mhz: r.positive("pump.repetition_rate_MHz", 41.0),
        };
        if !(pump.center_wavelength_nm > 1200.0 && pump.center_wavelength_nm < 1700.0) {
            r.issue("pump.center_wavelength_nm", "must lie in (1200, 1700) nm");
        }
        if let Some(t0) = pump.t0_ps {
            if !(t0 > 0.0) {
                r.issue("pump.t0_ps", format!("must be > 0, got {t0}"));
            }
        }

        let fiber = FiberSection {
            length_m: r.positive("fiber.length_m", 300.0),
            gamma_per_w_km: r.non_negative("fiber.gamma_per_W_km", 2.0),
            zero_dispersion_wavelength_nm: r.positive("fiber.zero_dispersion_wavelength_nm", 1537.0),
            dispersion_slope_ps_per_nm2_km: r.f64("fiber.dispersion_slope_ps_per_nm2_km", 0.07),
            beta2_ps2_per_km: r.opt_f64("fiber.beta2_ps2_per_km"),
        };

        let filter = FilterSection {
            fwhm_nm: r.positive("filter.fwhm_nm", 0.65),
            peak_transmission: r.positive("filter.peak_transmission", 1.0),
            detuning_nm: r.positive("filter.detuning_nm", 4.4),
        };
        if filter.peak_transmission > 1.0 {
            r.issue("filter.peak_transmission", "must be in (0, 1]");
        }

        let n_points = r.u64("grid.n_points", PropagationConfig::DEFAULT_POINTS as u64) as usize;
        if !n_points.is_power_of_two() || n_points < 1 << 12 {
            r.issue("grid.n_points", format!("must be a power of two >= 4096, got {n_points}"));
        }
        let grid = GridSection {
            n_points,
            time_window_t0: r.positive("grid.time_window_t0", PropagationConfig::DEFAULT_WINDOW_T0),
            n_steps: r.opt_u64("grid.n_steps").map(|n| n as usize),
        };
        if grid.n_steps == Some(0) {
            r.issue("grid.n_steps", "must be >= 1");
        }

        let method = r.string("propagation.method", "spm");
        let propagation_method = match method.as_str() {
            "spm" => SpectrumModel::SpmOnly,
            "split-step" => SpectrumModel::SplitStep,
            other => {
                r.issue("propagation.method", format!("expected \"spm\" or \"split-step\", got {other:?}"));
                SpectrumModel::SpmOnly
            }
        };

        let d = DetectorSpec::default();
        let detector = DetectorSection {
            efficiency: r.non_negative("detector.efficiency", d.efficiency),
            dark_prob: r.non_negative("detector.dark_prob", d.dark_prob),
            gate_rate_mhz: r.positive("detector.gate_rate_MHz", d.gate_rate / MHZ),
            gate_decimation: r.u64("detector.gate_decimation", d.gate_decimation as u64) as u32,
            dead_time_us: r.non_negative("detector.dead_time_us", d.dead_time * 1e6),
        };
        if detector.efficiency > 1.0 {
            r.issue("detector.efficiency", "must be in [0, 1]");
        }
        if detector.dark_prob > 1.0 {
            r.issue("detector.dark_prob", "must be in [0, 1]");
        }
        if detector.gate_decimation == 0 {
            r.issue("detector.gate_decimation", "must be >= 1");
        }

        let calibration = r.has_section("calibration").then(|| CalibrationSection {
            s1_signal_per_mw: r.non_negative("calibration.s1_signal_per_mW", 0.0),
            s1_idler_per_mw: r.non_negative("calibration.s1_idler_per_mW", 0.0),
            s2_per_mw2: r.non_negative("calibration.s2_per_mW2", 0.0),
            spm_scale: r.non_negative("calibration.spm_scale", 1.0),
        });

        let rates = r.has_section("rates").then(|| RateBreakdown {
            mu_pair: r.non_negative("rates.mu_pair", 0.0),
            mu_raman_s: r.non_negative("rates.mu_raman_s", 0.0),
            mu_raman_i: r.non_negative("rates.mu_raman_i", 0.0),
            mu_spm_s: r.non_negative("rates.mu_spm_s", 0.0),
            mu_spm_i: r.non_negative("rates.mu_spm_i", 0.0),
        });

        let run = RunSection {
            n_gates: r.u64("run.n_gates", 1_000_000),
            seed: r.u64("run.seed", 1),
            workers: r.opt_u64("run.workers").map(|w| w as usize),
        };
        if run.n_gates < 2 {
            r.issue("run.n_gates", "must be >= 2");
        }
        if run.workers == Some(0) {
            r.issue("run.workers", "must be >= 1");
        }

        let sweep = SweepSection {
            power_min_mw: r.non_negative("sweep.power_min_mW", 0.0),
            power_max_mw: r.non_negative("sweep.power_max_mW", 0.35),
            n_points: r.u64("sweep.n_points", 36) as usize,
            pump_fwhm_nm: r.f64_list("sweep.pump_fwhm_nm", &[0.95, 0.65]),
        };
        if sweep.power_max_mw < sweep.power_min_mw {
            r.issue("sweep.power_max_mW", "must be >= sweep.power_min_mW");
        }
        if sweep.n_points < 2 {
            r.issue("sweep.n_points", "must be >= 2");
        }
        if sweep.pump_fwhm_nm.is_empty() || sweep.pump_fwhm_nm.iter().any(|f| !(*f > 0.0)) {
            r.issue("sweep.pump_fwhm_nm", "must be a non-empty list of positive widths");
        }

        let tar = if r.has_section("tar") {
            let t = TarSection {
                powers_mw: r.f64_list("tar.powers_mW", &[]),
                detunings_nm: r.f64_list("tar.detunings_nm", &[]),
                s1_signal_per_mw: r.f64_list("tar.s1_signal_per_mW", &[]),
                s1_idler_per_mw: r.f64_list("tar.s1_idler_per_mW", &[]),
            };
            if t.powers_mw.is_empty() || t.powers_mw.iter().any(|p| !(*p >= 0.0)) {
                r.issue("tar.powers_mW", "must be a non-empty list of powers >= 0");
            }
            if t.detunings_nm.is_empty() || t.detunings_nm.iter().any(|d| !(*d > 0.0)) {
                r.issue("tar.detunings_nm", "must be a non-empty list of positive detunings");
            }
            for (key, list) in [
                ("tar.s1_signal_per_mW", &t.s1_signal_per_mw),
                ("tar.s1_idler_per_mW", &t.s1_idler_per_mw),
            ] {
                if list.len() != t.detunings_nm.len() {
                    r.issue(key, "needs one entry per detuning");
                } else if list.iter().any(|v| !(*v >= 0.0)) {
                    r.issue(key, "entries must be >= 0");
                }
            }
            Some(t)
        } else {
            None
        };

        let monitor_scale = r.positive("monitor.scale", DEFAULT_MONITOR_SCALE);

        r.finish()?;
        Ok(Self {
            pump,
            fiber,
            filter,
            grid,
            propagation_method,
            detector,
            calibration,
            rates,
            run,
            sweep,
            tar,
            monitor_scale,
        })
    }

    /// Pump pulse at the configured average power.
    pub fn pump_pulse(&self) -> Result<PumpPulse> {
        self.pump_pulse_at(self.pump.avg_power_mw * MW, self.pump.fwhm_nm)
    }

    /// Pump pulse at `average_power` (W) with the given spectral FWHM (nm);
    /// an explicit `pump.t0_ps` takes precedence over the width.
    pub fn pump_pulse_at(&self, average_power: f64, fwhm_nm: f64) -> Result<PumpPulse> {
        let lambda = self.pump.center_wavelength_nm * NM;
        let shape = match self.pump.t0_ps {
            Some(t0) => PumpPulse::new(0.0, t0 * PS, lambda)?,
            None => PumpPulse::from_spectral_fwhm(0.0, fwhm_nm * NM, lambda)?,
        };
        let train = crate::units::PulseTrain::new(self.repetition_rate(), average_power)?;
        let peak = crate::units::peak_power_from_average(&train, shape.t0)?;
        Ok(shape.with_peak_power(peak))
    }

    pub fn repetition_rate(&self) -> f64 {
        self.pump.repetition_rate_mhz * MHZ
    }

    pub fn fiber_spec(&self) -> Result<FiberSpec> {
        let lambda = self.pump.center_wavelength_nm * NM;
        let lambda0 = self.fiber.zero_dispersion_wavelength_nm * NM;
        // ps²/km → s²/m
        let beta2 = match self.fiber.beta2_ps2_per_km {
            Some(b) => b * PS * PS / 1e3,
            // ps/(nm²·km) → s/m³
            None => beta2_from_dispersion_slope(lambda, lambda0, self.fiber.dispersion_slope_ps_per_nm2_km * 1e3),
        };
        FiberSpec::new(self.fiber.length_m, self.fiber.gamma_per_w_km / 1e3, lambda0, beta2)
    }

    pub fn filter_sigma(&self) -> Result<f64> {
        fwhm_to_sigma(self.filter.fwhm_nm * NM)
    }

    pub fn propagation_config(&self, pulse: &PumpPulse, fiber: &FiberSpec) -> PropagationConfig {
        let base = PropagationConfig::for_pulse(pulse, fiber);
        PropagationConfig {
            n_points: self.grid.n_points,
            time_window: self.grid.time_window_t0 * pulse.t0,
            n_steps: self.grid.n_steps.unwrap_or(base.n_steps),
        }
    }

    pub fn detector_spec(&self) -> DetectorSpec {
        DetectorSpec {
            efficiency: self.detector.efficiency,
            dark_prob: self.detector.dark_prob,
            gate_rate: self.detector.gate_rate_mhz * MHZ,
            gate_decimation: self.detector.gate_decimation,
            dead_time: self.detector.dead_time_us * 1e-6,
        }
    }

    /// Calibration in per-W units.
    pub fn calibration_si(&self, section: &CalibrationSection) -> Calibration {
        Calibration {
            s1_signal: section.s1_signal_per_mw / MW,
            s1_idler: section.s1_idler_per_mw / MW,
            s2: section.s2_per_mw2 / (MW * MW),
            spm_scale: section.spm_scale,
        }
    }

    pub fn source_model(&self, detuning_nm: f64) -> Result<SourceModel> {
        let pump = self.pump_pulse_at(0.0, self.pump.fwhm_nm)?;
        let fiber = self.fiber_spec()?;
        let grid = (self.grid.n_points != PropagationConfig::DEFAULT_POINTS
            || self.grid.time_window_t0 != PropagationConfig::DEFAULT_WINDOW_T0
            || self.grid.n_steps.is_some())
        .then(|| PropagationConfig {
            n_points: self.grid.n_points,
            time_window: self.grid.time_window_t0 * pump.t0,
            n_steps: self.grid.n_steps.unwrap_or(PropagationConfig::for_pulse(&pump, &fiber).n_steps),
        });
        Ok(SourceModel {
            pump,
            repetition_rate: self.repetition_rate(),
            fiber,
            filter_sigma: self.filter_sigma()?,
            filter_peak_transmission: self.filter.peak_transmission,
            detuning: detuning_nm * NM,
            model: self.propagation_method,
            grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.pump.fwhm_nm, 0.95);
        assert_eq!(cfg.sweep.pump_fwhm_nm, vec![0.95, 0.65]);
        assert!(cfg.calibration.is_none() && cfg.rates.is_none() && cfg.tar.is_none());
        let fiber = cfg.fiber_spec().unwrap();
        assert!((fiber.gamma - 2e-3).abs() < 1e-15);
        assert!(fiber.beta2 < 0.0);
    }

    #[test]
    fn issues_are_itemized_with_key_paths() {
        let text = r#"
            [pump]
            fwhm_nm = -1.0
            colour = "blue"
            [detector]
            efficiency = "high"
            [grid]
            n_points = 1000
        "#;
        match ScenarioConfig::from_toml_str(text) {
            Err(Error::Config(issues)) => {
                let keys: Vec<&str> = issues.iter().map(|i| i.key.as_str()).collect();
                assert!(keys.contains(&"pump.fwhm_nm"));
                assert!(keys.contains(&"pump.colour"));
                assert!(keys.contains(&"detector.efficiency"));
                assert!(keys.contains(&"grid.n_points"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_document() {
        assert!(matches!(ScenarioConfig::from_toml_str("[pump\n"), Err(Error::Config(_))));
    }

    #[test]
    fn tar_lists_must_align() {
        let text = r#"
            [tar]
            powers_mW = [0.1, 0.2]
            detunings_nm = [4.4, 5.6]
            s1_signal_per_mW = [0.1]
            s1_idler_per_mW = [0.1, 0.2]
        "#;
        match ScenarioConfig::from_toml_str(text) {
            Err(Error::Config(issues)) => assert_eq!(issues[0].key, "tar.s1_signal_per_mW"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn explicit_beta2_and_t0() {
        let cfg = ScenarioConfig::from_toml_str("[fiber]\nbeta2_ps2_per_km = -0.1\n[pump]\nt0_ps = 3.0\n").unwrap();
        assert!((cfg.fiber_spec().unwrap().beta2 + 1e-28).abs() < 1e-40);
        assert!((cfg.pump_pulse().unwrap().t0 - 3e-12).abs() < 1e-24);
    }
}
