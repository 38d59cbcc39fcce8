mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliResult, Context};

/// Hypersphere embedding training, bound checks and verification evaluation.
#[derive(Parser)]
#[command(name = "hyperembed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; unknown keys are rejected
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed, overriding the config's `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV and model files [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn context(self) -> CliResult<Context> {
        Context::new(self.config.as_deref(), self.seed, self.out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train an embedding network; writes loss_curve.csv, model.bin, snapshots and features.bin
    Train(Common),
    /// Train with 2-D features and export scatter.csv
    Scatter(Common),
    /// Loss-floor bound for a single (n, ell_sq), or bound_curve.csv over a grid
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Number of classes
        #[arg(long)]
        n: Option<usize>,
        /// Squared feature norm
        #[arg(long = "ell-sq")]
        ell_sq: Option<f64>,
    },
    /// Finite-difference checks of every analytic gradient
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// `all`, `normalize`, or a loss name
        #[arg(long, default_value = "all")]
        loss: String,
        /// Random instances per check
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// k-fold pair verification accuracy and TPR at fixed FAR from a feature store
    EvalPairs(Common),
    /// HIK-SVM versus mean-score video verification
    EvalVideo(Common),
    /// Numeric checks of the scaling, loss-floor and agent-distortion results
    PropCheck {
        #[command(flatten)]
        common: Common,
        /// Random instances per check
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train(c) => commands::train_cmd(&c.context()?),
        Command::Scatter(c) => commands::scatter_cmd(&c.context()?),
        Command::Bounds { common, n, ell_sq } => commands::bounds_cmd(&common.context()?, n, ell_sq),
        Command::Gradcheck { common, loss, trials } => {
            commands::gradcheck_cmd(common.context()?.seed, &loss, trials)
        }
        Command::EvalPairs(c) => commands::eval_pairs_cmd(&c.context()?),
        Command::EvalVideo(c) => commands::eval_video_cmd(&c.context()?),
        Command::PropCheck { common, trials } => commands::prop_check_cmd(common.context()?.seed, trials),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
