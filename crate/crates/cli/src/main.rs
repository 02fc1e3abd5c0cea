mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edt_core::eval::{Arm, Side};

use crate::commands::Failure;

/// Learned single-factor augmentations with algebraic regularization, on a
/// procedural sprite world.
#[derive(Parser, Debug)]
#[command(name = "edt", version)]
struct Cli {
    /// key = value run configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Split scheme: axis, step, rand:<rho> or paths:<n>,<len>.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    l0: Option<f64>,
    #[arg(long)]
    l1: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    l3: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the full combination grid and write the EDT1 dataset.
    Gen,
    /// Check the algebraic laws of the roster and of the oracle image action.
    VerifyAlgebra {
        /// Verify this MONOID/ACTION text file instead of the roster.
        #[arg(long)]
        algebra: Option<PathBuf>,
    },
    /// Train one augmenter per factor generator.
    TrainAug {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train a predictor.
    TrainPred {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "edt")]
        arm: Arm,
        /// Skip ℓ3 augmentation entirely.
        #[arg(long)]
        no_aug: bool,
        /// Augmenter file; defaults to the one in the output directory.
        #[arg(long)]
        augmenters: Option<PathBuf>,
    },
    /// Score the trained predictor on one or both sides of the split.
    Eval {
        #[arg(long)]
        side: Option<Side>,
    },
    /// Run every arm over consecutive seeds and tabulate mean (std).
    Ablate {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated arms: erm, edt-l0l3, edt, oracle.
        #[arg(long, value_delimiter = ',')]
        arms: Option<Vec<Arm>>,
        /// Number of seeds, starting at the configured seed.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Residuals of the algebraic laws for trained augmenters.
    LawReport {
        #[arg(long)]
        augmenters: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Law(_) => commands::EXIT_LAW,
            Failure::Config(_) => commands::EXIT_CONFIG,
            Failure::Missing(_) => commands::EXIT_MISSING,
            Failure::Other(_) => 1,
        }
    }
}
