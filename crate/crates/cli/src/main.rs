//! `sac`: command-line driver for the stochastic Allen–Cahn lab.
//!
//! Exit codes: 0 success, 1 internal contract violation, 2 unreadable or
//! invalid input, 3 stability violation, 4 blowup, 5 failed gate.

mod commands;
mod config;
mod error;
mod plots;
mod svg;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sac_core::noise::{Mutations, NoiseModel};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "sac", version, about = "Stochastic Allen-Cahn experiments")]
struct Cli {
    /// Zero individual correction terms (validation mutations).
    #[arg(long, global = true, hide = true, value_delimiter = ',')]
    unsafe_debug: Vec<DebugFlag>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DebugFlag {
    ZeroA,
    ZeroC,
    ZeroPsi,
}

#[derive(Subcommand)]
enum Command {
    /// Single trajectory: CSV, snapshots and figures.
    Run { config: PathBuf },
    /// Monte Carlo ensemble over samples and eps.
    Ensemble { config: PathBuf },
    /// Sharp-interface sweep over a decreasing eps list.
    Sweep { config: PathBuf },
    /// Cross-backend validation suite; a config supplies the noise model.
    Validate { config: Option<PathBuf> },
    /// Re-render figures from the CSV tables in a directory.
    Plot { dir: PathBuf },
}

fn mutations(flags: &[DebugFlag]) -> Mutations {
    let mut m = Mutations::default();
    for f in flags {
        match f {
            DebugFlag::ZeroA => m.zero_a = true,
            DebugFlag::ZeroC => m.zero_c = true,
            DebugFlag::ZeroPsi => m.zero_psi = true,
        }
    }
    m
}

fn threads() -> CliResult<Option<usize>> {
    match std::env::var("SAC_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Input(format!("SAC_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn load(path: &Path, m: Mutations) -> CliResult<config::Experiment> {
    let exp = config::load(path, threads()?, m)?;
    for w in &exp.warnings {
        eprintln!("warning: {w}");
    }
    Ok(exp)
}

fn report_written(files: &[PathBuf]) {
    println!("wrote {} files", files.len());
    for f in files.iter().filter(|f| f.extension().is_some_and(|e| e != "sacf")) {
        println!("  {}", f.display());
    }
}

fn cmd_validate(config: Option<&Path>, m: Mutations) -> CliResult<()> {
    let model: NoiseModel = match config {
        None => validate::default_model().with_mutations(m),
        Some(path) => {
            let exp = load(path, m)?;
            let model = exp.ensemble.model;
            if model.dim() != 1 && model.n_modes() > 0 {
                return Err(CliError::Input(format!(
                    "{}: the validation setups are one-dimensional, the noise model has dim {}",
                    path.display(),
                    model.dim()
                )));
            }
            model
        }
    };
    let results = validate::suite(&model);
    println!("{:<28} {:<8} detail", "check", "status");
    for r in &results {
        println!("{:<28} {:<8} {}", r.name, r.status.label(), r.detail);
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|r| r.status == validate::Status::Fail)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gate(failed.join(", ")))
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let m = mutations(&cli.unsafe_debug);
    match cli.command {
        Command::Run { config } => report_written(&commands::cmd_run(&load(&config, m)?)?),
        Command::Ensemble { config } => report_written(&commands::cmd_ensemble(&load(&config, m)?)?),
        Command::Sweep { config } => report_written(&commands::cmd_sweep(&load(&config, m)?)?),
        Command::Validate { config } => cmd_validate(config.as_deref(), m)?,
        Command::Plot { dir } => report_written(&plots::render_dir(&dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
