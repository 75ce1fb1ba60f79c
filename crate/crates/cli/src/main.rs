//! `mmab`: validate configurations, solve the oracle, run seeded simulations,
//! sweep parameter grids and analyze the learning chain.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod grid;

use grid::List;

#[derive(Parser)]
#[command(name = "mmab", version, about = "Distributed multi-player bandits for spectrum access")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Instance and run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct Output {
    /// Output directory.
    #[arg(long, env = "MMAB_OUT_DIR", default_value = "mmab-out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated seeds; overrides `run.seeds`.
    #[arg(long)]
    seed: Option<List<u64>>,
    /// Overrides `run.horizon`.
    #[arg(long)]
    horizon: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and report every problem found.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the instance by enumeration and check separability.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Print one JSON record instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Simulate every seed and write traces, summaries and a manifest.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: Output,
    },
    /// One summary row per grid point and seed.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: Output,
        #[arg(long)]
        eps_grid: Option<List<f64>>,
        #[arg(long)]
        sigma_grid: Option<List<f64>>,
        #[arg(long)]
        horizon_grid: Option<List<u64>>,
    },
    /// Stationary masses over an eps grid and the unperturbed recurrence classes.
    ChainAnalyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value = "0.3,0.2,0.1,0.05")]
        eps_grid: List<f64>,
        /// Misread probability per play; exact utilities when absent.
        #[arg(long)]
        p_eps: Option<f64>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(common: &Common) -> Result<mmab_core::config::RunConfig> {
    Ok(mmab_core::config::load(&common.config)?)
}

fn apply(cfg: &mut mmab_core::config::RunConfig, run: RunArgs) -> Result<()> {
    if let Some(seeds) = run.seed {
        cfg.seeds = seeds.0;
    }
    if let Some(h) = run.horizon {
        cfg.horizon = h;
    }
    let mut sorted = cfg.seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        bail!("duplicate seeds in {:?}", cfg.seeds);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { common } => commands::validate(&common.config),
        Command::Oracle { common, json } => commands::oracle(&load(&common)?, json),
        Command::Run { common, run, output } => {
            let mut cfg = load(&common)?;
            apply(&mut cfg, run)?;
            commands::run(&cfg, &common.config, &output.out)
        }
        Command::Sweep {
            common,
            run,
            output,
            eps_grid,
            sigma_grid,
            horizon_grid,
        } => {
            let mut cfg = load(&common)?;
            apply(&mut cfg, run)?;
            let points = grid::points(
                &cfg,
                eps_grid.map(|g| g.0).unwrap_or_default(),
                sigma_grid.map(|g| g.0).unwrap_or_default(),
                horizon_grid.map(|g| g.0).unwrap_or_default(),
            );
            commands::sweep(&cfg, &points, &output.out)
        }
        Command::ChainAnalyze {
            common,
            output,
            eps_grid,
            p_eps,
        } => commands::chain_analyze(&load(&common)?, &eps_grid.0, p_eps, &output.out),
    }
}
