use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

#[derive(Parser, Debug)]
#[command(
    name = "gabp",
    version,
    about = "Train and apply GA-initialised neural networks for safety early warning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labelled dataset (train.csv, test.csv).
    GenData {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Train a model on labelled data and write model.toml plus reports.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: DataFiles,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Score unlabelled indicator rows with a trained model.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Indicator rows without a target column.
        #[arg(long)]
        input: PathBuf,
    },
    /// Measure a trained model on labelled data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Labelled rows to evaluate on.
        #[arg(long)]
        test: PathBuf,
    },
    /// Run GA-BP and plain BP on paired seeds and compare them.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: DataFiles,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        tuning: Tuning,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Also write SVG charts for every seed.
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    trainer: Option<TrainerArg>,
}

#[derive(Args, Debug, Clone, Default)]
struct DataFiles {
    /// Labelled training rows.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Labelled test rows.
    #[arg(long)]
    test: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct SynthArgs {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct Tuning {
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    goal_mse: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum VariantArg {
    Gabp,
    Bp,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum TrainerArg {
    Lm,
    Gd,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("gabp: error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
