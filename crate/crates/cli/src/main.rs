mod commands;
mod config;
mod meta;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Simulate graph-kernel bandits for sparse source placement.
#[derive(Debug, Parser)]
#[command(name = "grab", version, about)]
pub struct Cli {
    /// TOML configuration file; missing keys take built-in defaults.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed (overrides run.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Worker threads, 0 for all cores (overrides output.threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override a config key, e.g. `--set learner.k=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured graph as an edge list.
    GenerateGraph,
    /// Compute the best fixed arm and per-node reward weights.
    BestArm,
    /// Cumulative pseudo-regret of Grab-UCB, its zero-radius variant and the
    /// explore-then-exploit baselines.
    RunRegret,
    /// Normalized estimation error under varying topology or sparsity.
    RunErrorStudy,
    /// Wall time and reward of the vertex walk against enumeration.
    RunSolverBench,
    /// Confidence radius, determinant bound and regret bound along one run.
    ShowBounds,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
