//! `regnoise`: experiment driver for the regularization-by-noise pipeline.
//!
//! Every subcommand reads a TOML run configuration, applies `--set`
//! overrides and the dedicated flags (flags win), writes its artifacts into
//! the output directory and finishes with `manifest.json`.
//!
//! Exit codes: 0 success (including in-band explosion or divergence
//! statuses), 2 usage errors, 3 numerical failures.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::Oracle;
use manifest::Run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] regnoise::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_usage() => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "regnoise", version, about = "Regularization-by-noise experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample Gaussian paths.
    Simulate(Common),
    /// Occupation spectrum and local time of one path.
    Localtime(Common),
    /// Batch fit of the local-time Hölder exponent.
    Regularity(Common),
    /// Averaged field T^w b and its spatial jets.
    Average(Common),
    /// Nonlinear Young ODE with flow derivatives.
    Solve(SolveArgs),
    /// Local non-determinism profiles.
    Lnd(Common),
    /// Stochastic sewing hypothesis check.
    Sewcheck(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration entry, e.g. `--set model.hurst=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Compare against a classical adaptive integrator.
    #[arg(long, value_enum)]
    oracle: Option<Oracle>,
}

fn resolve<T: DeserializeOwned>(common: &Common, extra: &[(&str, toml::Value)]) -> Result<T, CliError> {
    let mut table = config::load_table(common.config.as_deref())?;
    for spec in &common.set {
        config::apply_override(&mut table, spec)?;
    }
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Usage("seed must fit in a signed 64-bit integer".into()))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    if let Some(out) = &common.out {
        table.insert("output".into(), toml::Value::String(out.to_string_lossy().into_owned()));
    }
    for (k, v) in extra {
        table.insert(k.to_string(), v.clone());
    }
    config::parse(table)
}

fn execute<C: Serialize>(
    name: &str,
    cfg: &C,
    output: &std::path::Path,
    body: impl FnOnce(&C, &mut Run) -> Result<serde_json::Value, CliError>,
) -> Result<(), CliError> {
    let mut run = Run::start(name, output, cfg)?;
    let result = body(cfg, &mut run)?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = run.finish(result)?;
    println!("{}", output.join("manifest.json").display());
    if let Some(status) = manifest.result.get("status") {
        eprintln!("status: {status}");
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate(c)
        | Command::Localtime(c)
        | Command::Regularity(c)
        | Command::Average(c)
        | Command::Lnd(c)
        | Command::Sewcheck(c) => c,
        Command::Solve(s) => &s.common,
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(c) => {
            let cfg: config::SimulateConfig = resolve(c, &[])?;
            execute("simulate", &cfg, &cfg.output, commands::simulate)
        }
        Command::Localtime(c) => {
            let cfg: config::LocaltimeConfig = resolve(c, &[])?;
            execute("localtime", &cfg, &cfg.output, commands::localtime)
        }
        Command::Regularity(c) => {
            let cfg: config::RegularityConfig = resolve(c, &[])?;
            execute("regularity", &cfg, &cfg.output, commands::regularity)
        }
        Command::Average(c) => {
            let cfg: config::AverageConfig = resolve(c, &[])?;
            execute("average", &cfg, &cfg.output, commands::average_cmd)
        }
        Command::Solve(s) => {
            let extra: Vec<(&str, toml::Value)> = s
                .oracle
                .map(|_| ("oracle", toml::Value::String("classical".into())))
                .into_iter()
                .collect();
            let cfg: config::SolveRunConfig = resolve(&s.common, &extra)?;
            execute("solve", &cfg, &cfg.output, commands::solve_cmd)
        }
        Command::Lnd(c) => {
            let cfg: config::LndConfig = resolve(c, &[])?;
            execute("lnd", &cfg, &cfg.output, commands::lnd)
        }
        Command::Sewcheck(c) => {
            let cfg: config::SewcheckConfig = resolve(c, &[])?;
            execute("sewcheck", &cfg, &cfg.output, commands::sewcheck)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
