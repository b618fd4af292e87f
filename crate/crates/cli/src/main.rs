use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use irskey::harness::{
    emit, run_allocation_sweep, run_ppp_sweep, run_scheme_comparison, run_validation, ExperimentConfig, Format,
};

/// Monte Carlo experiments for surface-assisted secret key generation.
#[derive(Debug, Parser)]
#[command(name = "irskey", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Secure rate of the random, fixed and no-surface schemes along a sweep axis.
    Compare(Common),
    /// Secure rate against training rounds for several interval lengths and powers.
    Allocate(Common),
    /// Key rate with randomly placed eavesdroppers, simulation against prediction.
    Ppp(Common),
    /// Run the self-check suite and report pass/fail counts.
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Override one setting, e.g. `--set P_dbm=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        for assignment in &self.overrides {
            cfg.set_override(assignment)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let (name, common) = match &cli.command {
        Command::Compare(c) => ("compare", c),
        Command::Allocate(c) => ("allocate", c),
        Command::Ppp(c) => ("ppp", c),
        Command::Validate(c) => ("validate", c),
    };
    if let Some(threads) = common.threads {
        if threads == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let cfg = common.resolve()?;
    let out = common.out.as_deref();
    log::info!("running {name} with seed {} and {} trials", cfg.seed, cfg.trials);
    let written = match &cli.command {
        Command::Compare(_) => {
            let report = run_scheme_comparison(&cfg)?;
            emit(out, common.format, name, &cfg, &report.rows, &report.points)?
        }
        Command::Allocate(_) => {
            let report = run_allocation_sweep(&cfg)?;
            emit(out, common.format, name, &cfg, &report.rows, &report.curves)?
        }
        Command::Ppp(_) => {
            let report = run_ppp_sweep(&cfg)?;
            let summary = serde_json::json!({ "points": report.points, "fits": report.fits });
            emit(out, common.format, name, &cfg, &report.rows, &summary)?
        }
        Command::Validate(_) => {
            let report = run_validation(&cfg);
            for check in &report.checks {
                eprintln!(
                    "{} {}: {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            eprintln!("{} passed, {} failed", report.passed(), report.failed());
            let summary = serde_json::json!({ "passed": report.passed(), "failed": report.failed() });
            emit(out, common.format, name, &cfg, &report.checks, &summary)?;
            return Ok(report.failed() == 0);
        }
    };
    for path in written {
        log::info!("wrote {}", path.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("irskey: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
