mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mb", version, about = "Model bridging between ML models and simulators")]
struct Cli {
    /// Worker threads for the parallel stages.
    #[arg(long, global = true, env = "MB_THREADS")]
    threads: Option<usize>,

    /// Overrides the dataset and calibration seeds of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the regime-shift dataset pool.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate the simulator on one dataset by kernel ABC.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-learn on a directory of datasets and train the bridge.
    Bridge {
        #[arg(long)]
        config: PathBuf,
        /// Directory of dataset CSVs, as written by gen-data.
        #[arg(long)]
        prelearn: PathBuf,
        /// Model JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Bridge a new dataset to simulator parameters without simulating.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Input at which to predict, comma separated for multi-dimensional inputs.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        x: Vec<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-out gap as a function of the number of training datasets.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenData { config, out } => commands::gen_data(&config, &out, cli.seed),
        Command::Calibrate { config, dataset, out } => commands::calibrate(&dataset, &config, &out, cli.seed),
        Command::Bridge { config, prelearn, out } => commands::bridge(&prelearn, &config, &out, cli.seed),
        Command::Predict { model, dataset, x, out } => commands::predict(&model, &dataset, &x, &out),
        Command::Convergence { config, out } => commands::convergence(&config, &out, cli.seed),
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
