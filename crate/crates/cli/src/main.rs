//! `edl`: experiment runner for evolutionary loss pretraining.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edl_cli::commands;
use edl_cli::config::{load_effective, ConfigOverrides};

#[derive(Parser)]
#[command(
    name = "edl",
    version,
    about = "Pretrain, ablate, and evaluate a learned classification loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the evolutionary search once and save the best loss network.
    Pretrain {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Compare chaotic against normal mutation over the ablation seeds.
    Ablate {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Re-score a saved checkpoint on a fresh validation set.
    Eval {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Train the blob classifier with the learned loss and cross-entropy.
    Downstream {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Measure fitness-estimator variance per Monte-Carlo batch count.
    ProbeVariance {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Train the gradient-descent baseline on the same ranking objective.
    Gd {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
}

fn run(cli: Cli) -> edl_core::Result<()> {
    match cli.command {
        Command::Pretrain { config, overrides } => {
            let cfg = load_effective(&config, &overrides)?;
            commands::cmd_pretrain(&cfg)
        }
        Command::Ablate { config, overrides } => {
            let cfg = load_effective(&config, &overrides)?;
            commands::cmd_ablate(&cfg)
        }
        Command::Eval {
            checkpoint,
            config,
            overrides,
        } => {
            let cfg = load_effective(&config, &overrides)?;
            commands::cmd_eval(&checkpoint, &cfg)
        }
        Command::Downstream {
            checkpoint,
            config,
            overrides,
        } => {
            let cfg = load_effective(&config, &overrides)?;
            commands::cmd_downstream(&checkpoint, &cfg)
        }
        Command::ProbeVariance { config, overrides } => {
            let cfg = load_effective(&config, &overrides)?;
            commands::cmd_probe_variance(&cfg)
        }
        Command::Gd { config, overrides } => {
            let cfg = load_effective(&config, &overrides)?;
            commands::cmd_gd(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
