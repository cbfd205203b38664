mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::ExperimentConfig;
use failure::{CliResult, Failure};

/// Precision bounds, schedule design and Monte-Carlo verification for
/// photonic sensor networks estimating a linear function of local parameters.
///
/// Exit codes: 0 success, 2 invalid input, 3 infeasible, 4 inconclusive
/// (search budget exhausted), 5 verification failure.
#[derive(Parser)]
#[command(name = "pnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the solver's node budget.
    #[arg(long, global = true, env = "PNET_NODE_BUDGET", hide = true)]
    node_budget: Option<u64>,
    /// Progress and per-run detail on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Entangled and separable MSE bounds as JSON (plus CSV rows).
    Bounds,
    /// Solve for an exact pass schedule and print it as JSON.
    Design,
    /// Recompute both QFI paths and the saturation residual of a schedule file.
    Verify {
        /// Schedule JSON as written by `design`; defaults to --config.
        schedule: Option<PathBuf>,
    },
    /// Robust phase estimation sweep, CSV.
    SimulatePhase,
    /// Gaussian displacement sensing over one or more mean photon numbers, CSV.
    SimulateDisplacement,
}

fn run(cli: Cli) -> CliResult<()> {
    let ctx = Context { out: cli.out, seed: cli.seed, node_budget: cli.node_budget, verbose: cli.verbose };
    let load = |path: &Option<PathBuf>| -> CliResult<ExperimentConfig> {
        let p = path.as_ref().ok_or_else(|| Failure::validation("--config PATH is required"))?;
        ExperimentConfig::load(p)
    };
    match cli.command {
        Command::Bounds => commands::bounds(&ctx, &load(&cli.config)?),
        Command::Design => commands::design(&ctx, &load(&cli.config)?),
        Command::Verify { schedule } => {
            let path = schedule.or(cli.config).ok_or_else(|| Failure::validation("verify needs a schedule file"))?;
            commands::verify(&ctx, &path)
        }
        Command::SimulatePhase => commands::simulate_phase(&ctx, &load(&cli.config)?),
        Command::SimulateDisplacement => commands::simulate_displacement(&ctx, &load(&cli.config)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
