use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spm_pairs::config::ScenarioConfig;
use spm_pairs::pipeline::{run_scenario, Pipeline, RunOptions};
use spm_pairs::{Error, Result};

/// Photon-pair source model: SPM pump leakage, Raman and SFWM counting.
#[derive(Parser, Debug)]
#[command(name = "spm-pairs", version)]
struct Cli {
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master RNG seed; overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Quadrature leakage on the propagated spectrum instead of the closed form.
    #[arg(long, global = true)]
    numeric: bool,

    /// Worker threads; defaults to run.workers, then all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pump spectrum at the fiber output → spectrum.csv
    Propagate,
    /// Minimum detuning vs average power → min_detuning.csv
    MinDetuning,
    /// Leakage photons in both bands at filter.detuning_nm → rejection.csv
    CheckRejection,
    /// Fit N(φ) = A + B(1 + cos(φ + φ0)) to phase_rad,counts[,counts_err]
    FringeFit { csv: PathBuf },
    /// Fit s1·P + s2·P² to avg_power_mW,baseline_counts_per_s[,baseline_err]
    PowerFit { csv: PathBuf },
    /// Gated Monte Carlo → ledger.csv, stats.csv
    Simulate { config: PathBuf },
    /// TAR vs power for each detuning → tar.csv
    Tar { config: PathBuf },
}

fn load(path: Option<&PathBuf>, required: bool) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::from_path(p),
        None if required => Err(Error::Config(vec![spm_pairs::error::ConfigIssue {
            key: "<document>".into(),
            message: "no config given (use --config <path>)".into(),
        }])),
        None => Ok(ScenarioConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let (pipeline, config_path, required) = match cli.command {
        Command::Propagate => (Pipeline::Propagate, cli.config, true),
        Command::MinDetuning => (Pipeline::MinDetuning, cli.config, true),
        Command::CheckRejection => (Pipeline::CheckRejection, cli.config, true),
        Command::FringeFit { csv } => (Pipeline::FringeFit(csv), cli.config, false),
        Command::PowerFit { csv } => (Pipeline::PowerFit(csv), cli.config, false),
        Command::Simulate { config } => (Pipeline::Simulate, Some(config), true),
        Command::Tar { config } => (Pipeline::Tar, Some(config), true),
    };
    let cfg = load(config_path.as_ref(), required)?;
    let opts = RunOptions {
        out_dir: cli.out,
        seed: cli.seed,
        numeric: cli.numeric,
        workers: cli.workers,
        config_path,
    };
    let report = run_scenario(&cfg, &pipeline, &opts)?;
    for line in &report.summary {
        println!("{line}");
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
