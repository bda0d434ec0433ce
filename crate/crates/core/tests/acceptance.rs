//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! doubles as a report.

use std::f64::consts::{LN_10, LN_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use spm_pairs::analysis::{fit_fringe, fit_power_law, fringe_expectation, FringeModel, FringeScan};
use spm_pairs::config::ScenarioConfig;
use spm_pairs::counting::{
    block_rng, coincidences, rates_from_physics, simulate_gates, DetectorSpec, PulseSampler, RateBreakdown,
};
use spm_pairs::leakage::{min_detuning_closed_form, min_detuning_numeric, BandSide, SpectrumModel};
use spm_pairs::pipeline::scenario_rates;
use spm_pairs::propagation::{
    input_spectrum, max_relative_deviation, spm_spectrum, split_step_propagate, PropagationConfig,
};
use spm_pairs::units::{FiberSpec, PumpPulse, MW, NM};

const C: f64 = 299_792_458.0;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spm-pairs"))
}

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

/// Hand evaluation of the Gaussian minimum-detuning formula, all in nm.
fn min_detuning_by_hand(avg_power_w: f64, pump_fwhm_nm: f64, filter_fwhm_nm: f64) -> f64 {
    let to_sigma = |fwhm: f64| fwhm / (2.0 * LN_2.sqrt());
    let lambda = 1538e-9;
    let sp = to_sigma(pump_fwhm_nm);
    let sf = to_sigma(filter_fwhm_nm);
    let t0 = lambda * lambda / (2.0 * PI * C * sp * 1e-9);
    let peak = avg_power_w / 41e6 / (t0 * PI.sqrt());
    let phi = 2.0e-3 * peak * 300.0;
    (10.0 * LN_10).sqrt() * (sp * sp * (1.0 + (0.88 * phi).powi(2)) + sf * sf).sqrt()
}

#[test]
fn criterion_1_min_detuning_sweep() {
    let out = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let run = bin()
        .args(["min-detuning", "--config"])
        .arg(data("power_sweep.toml"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    let elapsed = t.elapsed();
    assert!(run.status.success());

    let (h, rows) = read_csv(&out.path().join("min_detuning.csv"));
    let (ip, i95, i65) = (
        col(&h, "avg_power_mW"),
        col(&h, "min_detuning_nm_fwhm095"),
        col(&h, "min_detuning_nm_fwhm065"),
    );
    let num = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();

    let mut worst = 0.0f64;
    for k in [0, 9, 18, 27, 35] {
        let p = num(&rows[k], ip) * 1e-3;
        for (i, fwhm) in [(i95, 0.95), (i65, 0.65)] {
            let want = min_detuning_by_hand(p, fwhm, 0.65);
            worst = worst.max((num(&rows[k], i) - want).abs() / want);
        }
    }
    let increasing = rows.windows(2).all(|w| num(&w[1], i95) > num(&w[0], i95) && num(&w[1], i65) > num(&w[0], i65));
    let ordered = rows.iter().all(|r| num(r, i95) > num(r, i65));
    let (z95, z65) = (num(&rows[0], i95), num(&rows[0], i65));
    let ok = rows.len() == 36
        && worst < 1e-9
        && increasing
        && ordered
        && (z95 - 3.32).abs() <= 0.02
        && (z65 - 2.65).abs() <= 0.02
        && elapsed < Duration::from_secs(1);
    report(
        1,
        ok,
        &format!(
            "max rel err {worst:.2e}, intercepts {z95:.4}/{z65:.4} nm, increasing {increasing}, ordered {ordered}, {:.3} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_propagation_unitarity() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_energy = 0.0f64;
    let mut worst_dev = 0.0f64;
    for _ in 0..20 {
        let fwhm = rng.gen_range(0.5..1.2) * NM;
        let peak = rng.gen_range(0.1..3.0);
        let gamma = rng.gen_range(1.0..5.0) * 1e-3;
        let length = rng.gen_range(100.0..1000.0);
        // ±5 ps²/km
        let beta2 = rng.gen_range(-5.0..5.0) * 1e-27;
        let pulse = PumpPulse::from_spectral_fwhm(peak, fwhm, 1538.0 * NM).unwrap();
        let fiber = FiberSpec::new(length, gamma, 1537.0 * NM, beta2).unwrap();
        let cfg = PropagationConfig::for_pulse(&pulse, &fiber);

        let e0 = input_spectrum(&pulse, &cfg).unwrap().energy();
        let e1 = split_step_propagate(&pulse, &fiber, &cfg).unwrap().energy();
        worst_energy = worst_energy.max((e1 - e0).abs() / e0);

        let lossless = FiberSpec { beta2: 0.0, ..fiber };
        let ss = split_step_propagate(&pulse, &lossless, &cfg).unwrap();
        let closed = spm_spectrum(&pulse, &lossless, &cfg).unwrap();
        worst_dev = worst_dev.max(max_relative_deviation(&ss, &closed));
    }
    let elapsed = t.elapsed();
    let ok = worst_energy < 1e-10 && worst_dev < 1e-6 && elapsed < Duration::from_secs(30);
    report(
        2,
        ok,
        &format!(
            "energy drift {worst_energy:.2e}, split-step vs closed form {worst_dev:.2e}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_3_closed_form_vs_numeric_leakage() {
    let t = Instant::now();
    let widths = [0.2, 0.4, 0.6, 0.8, 1.0];
    let fiber = FiberSpec::new(300.0, 2e-3, 1537.0 * NM, 0.0).unwrap();
    let mut worst = (0.0f64, 0.0, 0.0);
    let mut failing = Vec::new();
    for sp in widths {
        for si in widths {
            let t0 = (1538.0 * NM).powi(2) / (2.0 * PI * C * sp * NM);
            let pulse = PumpPulse::new(0.0, t0, 1538.0 * NM).unwrap();
            let cfg = PropagationConfig::for_pulse(&pulse, &fiber);
            let closed = min_detuning_closed_form(&pulse, &fiber, si * NM);
            let numeric =
                min_detuning_numeric(&pulse, &fiber, si * NM, &cfg, SpectrumModel::SpmOnly, BandSide::Idler).unwrap();
            let rel = (numeric - closed).abs() / closed;
            if rel > worst.0 {
                worst = (rel, sp, si);
            }
            if rel > 0.02 {
                failing.push(format!("({sp},{si}):{:.2}%", rel * 100.0));
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = failing.is_empty() && elapsed < Duration::from_secs(60);
    report(
        3,
        ok,
        &format!(
            "worst {:.2}% at sigma_p={} sigma_i={} nm; {} of 25 beyond 2% [{}]; {:.1} s",
            worst.0 * 100.0,
            worst.1,
            worst.2,
            failing.len(),
            failing.join(" "),
            elapsed.as_secs_f64()
        ),
    );
}

/// Mean and standard error of `stat` over `batches` equal batches of draws.
fn batched(batches: usize, per_batch: usize, rates: &RateBreakdown, seed: u64, stat: impl Fn(&[u64]) -> f64) -> (f64, f64) {
    let sampler = PulseSampler::new(rates).unwrap();
    let mut values = Vec::with_capacity(batches);
    let mut buf = vec![0u64; per_batch];
    for b in 0..batches {
        let mut rng = block_rng(seed, b as u64);
        for slot in buf.iter_mut() {
            *slot = sampler.draw(&mut rng).0;
        }
        values.push(stat(&buf));
    }
    let m = values.iter().sum::<f64>() / batches as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

fn g2(n: &[u64]) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for &k in n {
        let k = k as f64;
        s1 += k;
        s2 += k * (k - 1.0);
    }
    let len = n.len() as f64;
    (s2 / len) / (s1 / len).powi(2)
}

fn fano(n: &[u64]) -> f64 {
    let len = n.len() as f64;
    let mean = n.iter().sum::<u64>() as f64 / len;
    let var = n.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (len - 1.0);
    var / mean
}

#[test]
fn criterion_4_photon_statistics() {
    let t = Instant::now();
    let (batches, per) = (100, 100_000);
    let mu = 0.2;

    let (g_sfwm, _) = batched(batches, per, &RateBreakdown { mu_pair: mu, ..Default::default() }, 41, g2);
    let (g_spm, _) = batched(batches, per, &RateBreakdown { mu_spm_s: mu, ..Default::default() }, 42, g2);
    let (f_rs, f_err) = batched(batches, per, &RateBreakdown { mu_raman_s: mu, ..Default::default() }, 43, fano);

    let pairs = RateBreakdown {
        mu_pair: 0.01,
        ..Default::default()
    };
    let ideal = DetectorSpec::ideal();
    let stats = coincidences(&simulate_gates(&pairs, &ideal, &ideal, 20_000_000, 44).unwrap()).unwrap();
    let tar = stats.tar.unwrap_or(f64::NAN);
    let elapsed = t.elapsed();

    let ok = (g_sfwm - 2.0).abs() <= 0.05
        && (g_spm - 1.0).abs() <= 0.02
        && (f_rs - (1.0 + mu)).abs() <= 3.0 * f_err
        && (tar - 100.0).abs() <= 10.0
        && elapsed < Duration::from_secs(300);
    report(
        4,
        ok,
        &format!(
            "g2 sfwm {g_sfwm:.4}, g2 spm {g_spm:.4}, raman var/mean {f_rs:.4} ± {f_err:.4} (want {:.2}), pure-pair TAR {tar:.2} over {} gates, {:.1} s",
            1.0 + mu,
            stats.n_gates,
            elapsed.as_secs_f64()
        ),
    );
}

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

#[test]
fn criterion_5_fit_round_trips() {
    // fringe, noiseless
    let (a, b, phi0) = (300.0, 700.0, 0.3);
    let phases: Vec<f64> = (0..20).map(|i| 2.0 * PI * i as f64 / 20.0).collect();
    let counts = phases.iter().map(|p| a + b * (1.0 + (p + phi0).cos())).collect();
    let fit = fit_fringe(&FringeScan {
        phases,
        counts,
        counts_err: None,
    })
    .unwrap();
    let fringe_err = [(fit.baseline, a), (fit.fringe_amp, b), (fit.phase_offset, phi0)]
        .iter()
        .map(|(got, want)| ((got - want) / want).abs())
        .fold(0.0, f64::max);

    // power law, noiseless; powers in mW, coefficients per mW and mW²
    let (s1, s2) = (10.0, 400.0);
    let powers = geomspace(0.002, 0.5, 8);
    let clean: Vec<f64> = powers.iter().map(|p| s1 * p + s2 * p * p).collect();
    let pf = fit_power_law(&powers, &clean, None).unwrap();
    let power_err = ((pf.s1 - s1) / s1).abs().max(((pf.s2 - s2) / s2).abs());

    // power law, 5% Gaussian noise
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 100;
    let mut hits = 0;
    for _ in 0..trials {
        let noisy: Vec<f64> = clean
            .iter()
            .map(|y| Normal::new(*y, 0.05 * y).unwrap().sample(&mut rng))
            .collect();
        let sigma: Vec<f64> = clean.iter().map(|y| 0.05 * y).collect();
        let f = fit_power_law(&powers, &noisy, Some(&sigma)).unwrap();
        if ((f.s1 - s1) / s1).abs() <= 0.1 && ((f.s2 - s2) / s2).abs() <= 0.1 {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    let ok = fringe_err < 1e-10 && power_err < 1e-10 && rate >= 0.95;
    report(
        5,
        ok,
        &format!("fringe round trip {fringe_err:.1e}, power round trip {power_err:.1e}, noisy success {hits}/{trials}"),
    );
}

#[test]
fn criterion_6_calibrated_scenarios() {
    // (a) fringe at 4 nm, 90 µW: SPM share of the idler counts from a noisy scan
    let cfg = ScenarioConfig::from_path(&data("fringe_4nm.toml")).unwrap();
    let rates = scenario_rates(&cfg).unwrap();
    let det = cfg.detector_spec();
    let n_pump = cfg.pump_pulse().unwrap().photon_number();
    let model = FringeModel::from_rates(&rates, BandSide::Idler, &det, n_pump, cfg.monitor_scale);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dwell = 10.0;
    let phases: Vec<f64> = (0..24).map(|i| 2.0 * PI * i as f64 / 24.0).collect();
    let counts: Vec<f64> = phases
        .iter()
        .map(|&p| {
            let rate = fringe_expectation(&model, p).0;
            Poisson::new(rate * dwell).unwrap().sample(&mut rng) / dwell
        })
        .collect();
    let errs = counts.iter().map(|c| c.max(1.0).sqrt() / dwell.sqrt()).collect();
    let fit = fit_fringe(&FringeScan {
        phases,
        counts,
        counts_err: Some(errs),
    })
    .unwrap();
    let share_ok = (fit.visibility - 0.70).abs() <= 0.05;

    // (b) N_S/N_F vs detuning at 140/190/240 µW
    let cfg = ScenarioConfig::from_path(&data("tar_crossover.toml")).unwrap();
    let cal = cfg.calibration_si(cfg.calibration.as_ref().unwrap());
    let detunings: Vec<f64> = (0..=16).map(|i| 4.4 + 0.1 * i as f64).collect();
    let mut crossings = Vec::new();
    let mut monotone = true;
    let mut prev: Option<Vec<f64>> = None;
    for p in [0.14, 0.19, 0.24] {
        let ratios: Vec<f64> = detunings
            .iter()
            .map(|&d| {
                let r = rates_from_physics(&cfg.source_model(d).unwrap(), p * MW, &cal).unwrap();
                let m = FringeModel::from_rates(&r, BandSide::Idler, &cfg.detector_spec(), 0.0, 0.0);
                m.n_s / m.n_f
            })
            .collect();
        monotone &= ratios.windows(2).all(|w| w[1] < w[0]);
        if let Some(lower) = &prev {
            monotone &= ratios.iter().zip(lower).all(|(hi, lo)| hi > lo);
        }
        let k = ratios.iter().position(|r| *r < 0.05);
        let cross = k.filter(|&k| k > 0).map(|k| {
            let (r0, r1) = (ratios[k - 1].ln(), ratios[k].ln());
            detunings[k - 1] + 0.1 * (r0 - 0.05f64.ln()) / (r0 - r1)
        });
        crossings.push(cross.unwrap_or(f64::NAN));
        prev = Some(ratios);
    }
    let ordered = crossings.iter().all(|c| c.is_finite()) && crossings.windows(2).all(|w| w[1] > w[0]);

    let ok = share_ok && monotone && ordered;
    report(
        6,
        ok,
        &format!(
            "SPM share at 4 nm/90 uW {:.3} (model {:.3}); N_S/N_F monotone {monotone}; 5% crossings {:.2}/{:.2}/{:.2} nm at 140/190/240 uW",
            fit.visibility,
            model.spm_fraction(),
            crossings[0],
            crossings[1],
            crossings[2]
        ),
    );
}

#[test]
fn criterion_7_tar_crossover() {
    let out = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let run = bin()
        .arg("tar")
        .arg(data("tar_crossover.toml"))
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    let elapsed = t.elapsed();
    assert!(run.status.success());

    let (h, rows) = read_csv(&out.path().join("tar.csv"));
    let (id, ip, it, ie, ig) = (
        col(&h, "detuning_nm"),
        col(&h, "avg_power_mW"),
        col(&h, "tar"),
        col(&h, "tar_err"),
        col(&h, "n_gates"),
    );
    let curve = |d: f64| -> Vec<(f64, f64, f64)> {
        rows.iter()
            .filter(|r| r[id].parse::<f64>().unwrap() == d)
            .map(|r| (r[ip].parse().unwrap(), r[it].parse().unwrap(), r[ie].parse().unwrap()))
            .collect()
    };
    let (near, far) = (curve(4.4), curve(5.6));
    let enough_gates = rows.iter().all(|r| r[ig].parse::<u64>().unwrap() >= 10_000_000);

    let (lo_n, lo_f) = (near[0], far[0]);
    let (hi_n, hi_f) = (near[near.len() - 1], far[far.len() - 1]);
    let low_sep = lo_n.1 - 3.0 * lo_n.2 > lo_f.1 + 3.0 * lo_f.2;
    let high_sep = hi_f.1 - 3.0 * hi_f.2 > hi_n.1 + 3.0 * hi_n.2;
    let signs: Vec<bool> = near.iter().zip(&far).map(|(n, f)| n.1 > f.1).collect();
    let sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let cross_at = near
        .iter()
        .zip(&far)
        .position(|(n, f)| n.1 <= f.1)
        .map(|k| near[k].0)
        .unwrap_or(f64::NAN);

    let ok = enough_gates && low_sep && high_sep && sign_changes == 1 && elapsed < Duration::from_secs(600);
    report(
        7,
        ok,
        &format!(
            "TAR at {} mW: {:.2}±{:.2} (4.4 nm) vs {:.2}±{:.2} (5.6 nm); at {} mW: {:.3}±{:.3} vs {:.2}±{:.2}; crosses by {cross_at} mW; {:.1} s",
            lo_n.0, lo_n.1, lo_n.2, lo_f.1, lo_f.2, hi_n.0, hi_n.1, hi_n.2, hi_f.1, hi_f.2,
            elapsed.as_secs_f64()
        ),
    );
}

fn run_to(dir: &Path, args: &[&str], config: &Path, workers: usize) {
    let run = bin()
        .args(args)
        .arg(config)
        .args(["--seed", "99", "--workers", &workers.to_string(), "--out"])
        .arg(dir)
        .output()
        .unwrap();
    assert!(run.status.success());
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let tar_cfg = tmp.path().join("tar_small.toml");
    let text = std::fs::read_to_string(data("tar_crossover.toml"))
        .unwrap()
        .replace("n_gates = 20000000", "n_gates = 200000");
    std::fs::write(&tar_cfg, text).unwrap();

    let mut identical = true;
    let mut compared = 0;
    for (cmd, config, files) in [
        ("simulate", data("small_sim.toml"), vec!["ledger.csv", "stats.csv"]),
        ("tar", tar_cfg.clone(), vec!["tar.csv"]),
    ] {
        let dirs: Vec<PathBuf> = [1usize, 3, 1]
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let d = tmp.path().join(format!("{cmd}-{k}-{w}"));
                run_to(&d, &[cmd], &config, w);
                d
            })
            .collect();
        for f in &files {
            let reference = std::fs::read(dirs[0].join(f)).unwrap();
            for d in &dirs[1..] {
                identical &= std::fs::read(d.join(f)).unwrap() == reference;
                compared += 1;
            }
        }
    }
    report(
        8,
        identical,
        &format!("{compared} repeated-run CSV comparisons across 1 and 3 workers, byte-identical {identical}"),
    );
}
