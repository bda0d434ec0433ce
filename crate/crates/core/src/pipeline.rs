//! Config-driven pipelines behind the CLI.
//!
//! Every pipeline computes its rows first (in parallel where points are
//! independent), then a single writer emits the CSVs and `manifest.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{fit_fringe, fit_power_law, FringeScan};
use crate::config::ScenarioConfig;
use crate::counting::{coincidences, rates_from_physics, simulate_gates, GateLedger, RateBreakdown};
use crate::error::{ConfigIssue, Error, Result};
use crate::leakage::{
    band_filter, min_detuning_closed_form, min_detuning_numeric, rejection_ratio_closed_form, BandSide,
    LeakageReport, LeakageSpectra, REJECTION_THRESHOLD,
};
use crate::propagation::{broadening_factor, spm_spectrum, split_step_propagate};
use crate::leakage::SpectrumModel;
use crate::units::{angular_frequency_to_wavelength, pump_sigma, HBAR, MW, NM, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pipeline {
    Propagate,
    MinDetuning,
    CheckRejection,
    FringeFit(PathBuf),
    PowerFit(PathBuf),
    Simulate,
    Tar,
}

impl Pipeline {
    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Propagate => "propagate",
            Pipeline::MinDetuning => "min-detuning",
            Pipeline::CheckRejection => "check-rejection",
            Pipeline::FringeFit(_) => "fringe-fit",
            Pipeline::PowerFit(_) => "power-fit",
            Pipeline::Simulate => "simulate",
            Pipeline::Tar => "tar",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides `run.seed`.
    pub seed: Option<u64>,
    /// Quadrature leakage instead of the closed form.
    pub numeric: bool,
    /// Overrides `run.workers`; `None` uses all cores.
    pub workers: Option<usize>,
    /// Path the config was read from, recorded in the manifest.
    pub config_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

/// Float formatting for CSV: shortest round-trip representation, exponent
/// notation outside [1e-4, 1e7).
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e7).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        w.write_record(&self.header).map_err(|e| csv_err(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| csv_err(path, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Input {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn config_error(key: &str, message: &str) -> Error {
    Error::Config(vec![ConfigIssue {
        key: key.into(),
        message: message.into(),
    }])
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Seed for the `index`-th independent run under `master` (SplitMix64 step).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Column suffix for a pump width: 0.95 nm → `095`.
fn fwhm_tag(fwhm_nm: f64) -> String {
    format!("{:03}", (fwhm_nm * 100.0).round() as u64)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    pipeline: &'a str,
    version: &'a str,
    seed: u64,
    workers: Option<usize>,
    numeric: bool,
    config_path: Option<String>,
    input: Option<String>,
    config: &'a ScenarioConfig,
    constants: Constants,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Constants {
    speed_of_light_m_per_s: f64,
    hbar_j_s: f64,
    rejection_threshold: f64,
}

/// Runs one pipeline and writes its outputs plus `manifest.json` into `opts.out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, pipeline: &Pipeline, opts: &RunOptions) -> Result<RunReport> {
    let workers = opts.workers.or(cfg.run.workers);
    let seed = opts.seed.unwrap_or(cfg.run.seed);
    let tables = with_pool(workers, || match pipeline {
        Pipeline::Propagate => propagate(cfg),
        Pipeline::MinDetuning => min_detuning(cfg, opts.numeric),
        Pipeline::CheckRejection => check_rejection(cfg, opts.numeric),
        Pipeline::FringeFit(path) => fringe_fit_file(path),
        Pipeline::PowerFit(path) => power_fit_file(path),
        Pipeline::Simulate => simulate(cfg, seed),
        Pipeline::Tar => tar(cfg, seed),
    })?;

    fs::create_dir_all(&opts.out_dir)?;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for out in &tables {
        let path = opts.out_dir.join(out.file);
        out.table.write(&path)?;
        summary.extend(out.summary.iter().cloned());
        files.push(path);
    }

    let input = match pipeline {
        Pipeline::FringeFit(p) | Pipeline::PowerFit(p) => Some(p.display().to_string()),
        _ => None,
    };
    let manifest = Manifest {
        pipeline: pipeline.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        workers,
        numeric: opts.numeric,
        config_path: opts.config_path.as_ref().map(|p| p.display().to_string()),
        input,
        config: cfg,
        constants: Constants {
            speed_of_light_m_per_s: SPEED_OF_LIGHT,
            hbar_j_s: HBAR,
            rejection_threshold: REJECTION_THRESHOLD,
        },
        outputs: tables.iter().map(|t| t.file.to_string()).collect(),
    };
    let path = opts.out_dir.join("manifest.json");
    let mut f = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| Error::Io(e.into()))?;
    f.write_all(b"\n")?;
    files.push(path);
    Ok(RunReport { files, summary })
}

struct Output {
    file: &'static str,
    table: Table,
    summary: Vec<String>,
}

fn propagate(cfg: &ScenarioConfig) -> Result<Vec<Output>> {
    let pulse = cfg.pump_pulse()?;
    let fiber = cfg.fiber_spec()?;
    let grid = cfg.propagation_config(&pulse, &fiber);
    let field = match cfg.propagation_method {
        SpectrumModel::SpmOnly => spm_spectrum(&pulse, &fiber, &grid)?,
        SpectrumModel::SplitStep => split_step_propagate(&pulse, &fiber, &grid)?,
    };
    let mut t = Table::new(&["omega_rad_s", "lambda_nm", "power_spectral_density_J_per_rad_s"]);
    for (w, p) in field.omega_grid.iter().zip(field.power_spectral_density()) {
        t.push(vec![fmt_f64(*w), fmt_f64(angular_frequency_to_wavelength(*w)? / NM), fmt_f64(p)]);
    }
    let summary = vec![
        format!("peak power        {} W", fmt_f64(pulse.peak_power)),
        format!("nonlinear phase   {} rad", fmt_f64(fiber.nonlinear_phase(pulse.peak_power))),
        format!("broadening factor {}", fmt_f64(broadening_factor(&pulse, &fiber))),
        format!("energy            {} J", fmt_f64(field.energy())),
    ];
    Ok(vec![Output {
        file: "spectrum.csv",
        table: t,
        summary,
    }])
}

fn min_detuning(cfg: &ScenarioConfig, numeric: bool) -> Result<Vec<Output>> {
    let fiber = cfg.fiber_spec()?;
    let sigma_f = cfg.filter_sigma()?;
    let powers = linspace(cfg.sweep.power_min_mw, cfg.sweep.power_max_mw, cfg.sweep.n_points);
    let widths = &cfg.sweep.pump_fwhm_nm;

    let jobs: Vec<(usize, f64)> = (0..powers.len())
        .flat_map(|i| widths.iter().map(move |w| (i, *w)))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, w)| -> Result<f64> {
            let pulse = cfg.pump_pulse_at(powers[i] * MW, w)?;
            if numeric {
                let grid = cfg.propagation_config(&pulse, &fiber);
                min_detuning_numeric(&pulse, &fiber, sigma_f, &grid, cfg.propagation_method, BandSide::Idler)
            } else {
                Ok(min_detuning_closed_form(&pulse, &fiber, sigma_f))
            }
        })
        .collect::<Result<_>>()?;

    let mut header = vec!["avg_power_mW".to_string()];
    header.extend(widths.iter().map(|w| format!("min_detuning_nm_fwhm{}", fwhm_tag(*w))));
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for (i, p) in powers.iter().enumerate() {
        let mut row = vec![fmt_f64(*p)];
        row.extend(values[i * widths.len()..(i + 1) * widths.len()].iter().map(|v| fmt_f64(v / NM)));
        t.push(row);
    }
    let summary = widths
        .iter()
        .enumerate()
        .map(|(j, w)| {
            format!(
                "FWHM {w} nm: {} nm at {} mW, {} nm at {} mW",
                fmt_f64(values[j] / NM),
                fmt_f64(powers[0]),
                fmt_f64(values[(powers.len() - 1) * widths.len() + j] / NM),
                fmt_f64(powers[powers.len() - 1]),
            )
        })
        .collect();
    Ok(vec![Output {
        file: "min_detuning.csv",
        table: t,
        summary,
    }])
}

fn check_rejection(cfg: &ScenarioConfig, numeric: bool) -> Result<Vec<Output>> {
    let pulse = cfg.pump_pulse()?;
    let fiber = cfg.fiber_spec()?;
    let sigma_f = cfg.filter_sigma()?;
    let detuning = cfg.filter.detuning_nm * NM;
    let n_pump = cfg.pump.avg_power_mw * MW / cfg.repetition_rate() / (HBAR * pulse.center_omega());

    let spectra = if numeric {
        let grid = cfg.propagation_config(&pulse, &fiber);
        Some(LeakageSpectra::compute(&pulse, &fiber, &grid, cfg.propagation_method)?)
    } else {
        None
    };

    let mut t = Table::new(&[
        "band",
        "detuning_nm",
        "method",
        "n_pump_photons",
        "n_spm_band",
        "rejection_ratio",
        "passes_1e_minus_10",
    ]);
    let mut summary = Vec::new();
    for side in [BandSide::Idler, BandSide::Signal] {
        let filter = band_filter(&pulse, detuning, sigma_f, cfg.filter.peak_transmission, side)?;
        let ratio = match &spectra {
            Some(s) => s.ratio(&filter)?,
            None => cfg.filter.peak_transmission * rejection_ratio_closed_form(&pulse, &fiber, sigma_f, detuning),
        };
        let report = LeakageReport {
            n_pump_photons: n_pump,
            n_spm_band: ratio * n_pump,
            rejection_ratio: ratio,
            passes_1e_minus_10: ratio < REJECTION_THRESHOLD,
        };
        let band = match side {
            BandSide::Idler => "idler",
            BandSide::Signal => "signal",
        };
        t.push(vec![
            band.into(),
            fmt_f64(cfg.filter.detuning_nm),
            if numeric { "quadrature" } else { "closed-form" }.into(),
            fmt_f64(report.n_pump_photons),
            fmt_f64(report.n_spm_band),
            fmt_f64(report.rejection_ratio),
            report.passes_1e_minus_10.to_string(),
        ]);
        summary.push(format!(
            "{band}: ratio {} ({})",
            fmt_f64(report.rejection_ratio),
            if report.passes_1e_minus_10 { "passes" } else { "fails" }
        ));
    }
    summary.push(format!("pump sigma {} nm", fmt_f64(pump_sigma(&pulse) / NM)));
    Ok(vec![Output {
        file: "rejection.csv",
        table: t,
        summary,
    }])
}

/// Required columns in order, plus the optional column when present.
type Columns = (Vec<Vec<f64>>, Option<Vec<f64>>);

fn read_numeric_csv(path: &Path, required: &[&str], optional: &str) -> Result<Columns> {
    let input_err = |message: String| Error::Input {
        path: path.display().to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| input_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| input_err(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = Vec::new();
    for name in required {
        idx.push(find(name).ok_or_else(|| input_err(format!("missing column {name:?}")))?);
    }
    let opt_idx = find(optional);

    let mut cols = vec![Vec::new(); required.len()];
    let mut opt = opt_idx.map(|_| Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| input_err(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| input_err(format!("row {}: {:?} is not a number", line + 2, s)))
        };
        for (c, &i) in idx.iter().enumerate() {
            cols[c].push(parse(i)?);
        }
        if let (Some(i), Some(o)) = (opt_idx, opt.as_mut()) {
            o.push(parse(i)?);
        }
    }
    Ok((cols, opt))
}

fn fringe_fit_file(path: &Path) -> Result<Vec<Output>> {
    let (cols, err) = read_numeric_csv(path, &["phase_rad", "counts"], "counts_err")?;
    let mut cols = cols.into_iter();
    let scan = FringeScan {
        phases: cols.next().unwrap_or_default(),
        counts: cols.next().unwrap_or_default(),
        counts_err: err,
    };
    let fit = fit_fringe(&scan)?;
    let mut t = Table::new(&[
        "baseline",
        "baseline_err",
        "fringe_amp",
        "fringe_amp_err",
        "phase_offset_rad",
        "visibility",
        "residual_rms",
        "baseline_clipped",
    ]);
    t.push(vec![
        fmt_f64(fit.baseline),
        fmt_f64(fit.baseline_err),
        fmt_f64(fit.fringe_amp),
        fmt_f64(fit.fringe_amp_err),
        fmt_f64(fit.phase_offset),
        fmt_f64(fit.visibility),
        fmt_f64(fit.residual_rms),
        fit.baseline_clipped.to_string(),
    ]);
    let mut summary = vec![format!(
        "baseline {} ± {}, fringe {} ± {}, visibility {}",
        fmt_f64(fit.baseline),
        fmt_f64(fit.baseline_err),
        fmt_f64(fit.fringe_amp),
        fmt_f64(fit.fringe_amp_err),
        fmt_f64(fit.visibility)
    )];
    if fit.baseline_clipped {
        summary.push("warning: negative baseline clipped to 0".into());
    }
    Ok(vec![Output {
        file: "fringe_fit.csv",
        table: t,
        summary,
    }])
}

fn power_fit_file(path: &Path) -> Result<Vec<Output>> {
    let (cols, err) = read_numeric_csv(path, &["avg_power_mW", "baseline_counts_per_s"], "baseline_err")?;
    // fit in mW so the coefficients come out per mW and per mW²
    let fit = fit_power_law(&cols[0], &cols[1], err.as_deref())?;
    let mut t = Table::new(&[
        "s1_counts_per_s_per_mW",
        "s1_err",
        "s2_counts_per_s_per_mW2",
        "s2_err",
        "residual_rms",
    ]);
    t.push(vec![
        fmt_f64(fit.s1),
        fmt_f64(fit.s1_err()),
        fmt_f64(fit.s2),
        fmt_f64(fit.s2_err()),
        fmt_f64(fit.residual_rms),
    ]);
    let summary = vec![format!(
        "s1 = {} ± {} /s/mW, s2 = {} ± {} /s/mW²",
        fmt_f64(fit.s1),
        fmt_f64(fit.s1_err()),
        fmt_f64(fit.s2),
        fmt_f64(fit.s2_err())
    )];
    Ok(vec![Output {
        file: "power_fit.csv",
        table: t,
        summary,
    }])
}

/// Per-pulse means for `simulate`: explicit `rates` win over `calibration`.
pub fn scenario_rates(cfg: &ScenarioConfig) -> Result<RateBreakdown> {
    if let Some(r) = cfg.rates {
        r.validate()?;
        return Ok(r);
    }
    let Some(cal) = &cfg.calibration else {
        return Err(config_error("rates", "simulate needs a [rates] or [calibration] section"));
    };
    let source = cfg.source_model(cfg.filter.detuning_nm)?;
    rates_from_physics(&source, cfg.pump.avg_power_mw * MW, &cfg.calibration_si(cal))
}

fn ledger_table(ledger: &GateLedger) -> Table {
    let mut t = Table::new(&["gate_index", "signal_hit", "idler_hit"]);
    let (s, i) = (&ledger.signal_hits, &ledger.idler_hits);
    let (mut a, mut b) = (0, 0);
    while a < s.len() || b < i.len() {
        let g = match (s.get(a), i.get(b)) {
            (Some(x), Some(y)) => *x.min(y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => unreachable!(),
        };
        let hs = s.get(a) == Some(&g);
        let hi = i.get(b) == Some(&g);
        a += hs as usize;
        b += hi as usize;
        t.push(vec![g.to_string(), (hs as u8).to_string(), (hi as u8).to_string()]);
    }
    t
}

fn simulate(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<Output>> {
    let rates = scenario_rates(cfg)?;
    let det = cfg.detector_spec();
    let ledger = simulate_gates(&rates, &det, &det, cfg.run.n_gates, seed)?;
    let stats = coincidences(&ledger)?;

    let mut t = Table::new(&["singles_s", "singles_i", "c_c", "c_a", "tar", "n_gates", "seed"]);
    let tar = stats.tar.map_or("undefined".to_string(), fmt_f64);
    t.push(vec![
        stats.singles_s.to_string(),
        stats.singles_i.to_string(),
        stats.c_c.to_string(),
        stats.c_a.to_string(),
        tar.clone(),
        stats.n_gates.to_string(),
        seed.to_string(),
    ]);
    let summary = vec![format!(
        "{} gates: singles {}/{}, C_c {}, C_a {}, TAR {}",
        stats.n_gates, stats.singles_s, stats.singles_i, stats.c_c, stats.c_a, tar
    )];
    Ok(vec![
        Output {
            file: "ledger.csv",
            table: ledger_table(&ledger),
            summary: Vec::new(),
        },
        Output {
            file: "stats.csv",
            table: t,
            summary,
        },
    ])
}

fn tar(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<Output>> {
    let Some(sweep) = &cfg.tar else {
        return Err(config_error("tar", "tar needs a [tar] section"));
    };
    let Some(cal) = &cfg.calibration else {
        return Err(config_error("calibration", "tar needs a [calibration] section for s2 and spm_scale"));
    };
    let det = cfg.detector_spec();

    let points: Vec<(usize, usize)> = (0..sweep.detunings_nm.len())
        .flat_map(|j| (0..sweep.powers_mw.len()).map(move |i| (j, i)))
        .collect();
    let rates: Vec<RateBreakdown> = points
        .par_iter()
        .map(|&(j, i)| {
            let mut c = cfg.calibration_si(cal);
            c.s1_signal = sweep.s1_signal_per_mw[j] / MW;
            c.s1_idler = sweep.s1_idler_per_mw[j] / MW;
            let source = cfg.source_model(sweep.detunings_nm[j])?;
            rates_from_physics(&source, sweep.powers_mw[i] * MW, &c)
        })
        .collect::<Result<_>>()?;

    let mut t = Table::new(&[
        "detuning_nm",
        "avg_power_mW",
        "seed",
        "mu_pair",
        "mu_raman_s",
        "mu_raman_i",
        "mu_spm_s",
        "mu_spm_i",
        "singles_s",
        "singles_i",
        "c_c",
        "c_a",
        "tar",
        "tar_err",
        "n_gates",
    ]);
    let mut summary = Vec::new();
    for (k, (&(j, i), r)) in points.iter().zip(&rates).enumerate() {
        let point_seed = derive_seed(seed, k as u64);
        let ledger = simulate_gates(r, &det, &det, cfg.run.n_gates, point_seed)?;
        let s = coincidences(&ledger)?;
        let tar = s.tar.map_or("undefined".to_string(), fmt_f64);
        let tar_err = s.tar_std_error().map_or("undefined".to_string(), fmt_f64);
        summary.push(format!(
            "{} nm, {} mW: TAR {} ± {}",
            sweep.detunings_nm[j], sweep.powers_mw[i], tar, tar_err
        ));
        t.push(vec![
            fmt_f64(sweep.detunings_nm[j]),
            fmt_f64(sweep.powers_mw[i]),
            point_seed.to_string(),
            fmt_f64(r.mu_pair),
            fmt_f64(r.mu_raman_s),
            fmt_f64(r.mu_raman_i),
            fmt_f64(r.mu_spm_s),
            fmt_f64(r.mu_spm_i),
            s.singles_s.to_string(),
            s.singles_i.to_string(),
            s.c_c.to_string(),
            s.c_a.to_string(),
            tar,
            tar_err,
            s.n_gates.to_string(),
        ]);
    }
    Ok(vec![Output {
        file: "tar.csv",
        table: t,
        summary,
    }])
}
