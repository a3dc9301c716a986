//! `nmjd`: generate data, train, forecast, calibrate baselines and evaluate.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure. Logs go
//! to stderr; results go to files only.

mod commands;
mod dataset_args;
mod error;
mod forecast_csv;
mod io;

use clap::{Parser, Subcommand};
use log::error;

use commands::{calibrate, evaluate, forecast, generate, train};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "nmjd",
    version,
    about = "Neural Merton jump-diffusion forecasting"
)]
struct Cli {
    /// Worker threads [default: all cores]. Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a synthetic jump-diffusion dataset.
    Generate(generate::GenerateArgs),
    /// Train the schedule network.
    Train(train::TrainArgs),
    /// Sample forecasts from a checkpoint or a stationary baseline.
    Forecast(forecast::ForecastArgs),
    /// Fit a stationary BS or MJD model to every series.
    Calibrate(calibrate::CalibrateArgs),
    /// Score forecast files under the mean, best-of-K and probabilistic protocols.
    Evaluate(evaluate::EvaluateArgs),
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Generate(a) => generate::run(a),
        Command::Train(a) => train::run(a),
        Command::Forecast(a) => forecast::run(a),
        Command::Calibrate(a) => calibrate::run(a),
        Command::Evaluate(a) => evaluate::run(a),
    }
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(&cli) {
        error!("{e}");
        std::process::exit(e.code);
    }
}
