use std::fs;
use std::path::PathBuf;

use clap::Args;
use log::info;
use nmjd_core::data::SyntheticSpec;
use nmjd_core::{generate_synthetic, write_series_csv};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{display, file_sha256, record_run, write_json};

pub const SERIES_FILE: &str = "series.csv";
pub const PARAMS_FILE: &str = "params.json";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of paths.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub paths: u64,
    /// Solver steps per path over unit time; each path has steps + 1 values.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub steps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for series.csv, params.json and run.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct OutputFile {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct GenerateRun {
    spec: SyntheticSpec,
    series: OutputFile,
    params: OutputFile,
    total_jumps: u64,
}

pub fn run(args: &GenerateArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        n_paths: args.paths as usize,
        n_steps: args.steps as usize,
        seed: args.seed,
    };
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(e.to_string()).context(display(&args.out)))?;
    let set = generate_synthetic(spec.n_paths, spec.n_steps, spec.seed)?;
    let total_jumps: u64 = set.jump_counts.iter().sum();
    info!(
        "simulated {} paths, {:.3} jumps per path on average",
        spec.n_paths,
        total_jumps as f64 / spec.n_paths as f64
    );

    let series_path = args.out.join(SERIES_FILE);
    let file = fs::File::create(&series_path)
        .map_err(|e| CliError::data(e.to_string()).context(display(&series_path)))?;
    write_series_csv(std::io::BufWriter::new(file), &set.series, &[])?;
    let params_path = args.out.join(PARAMS_FILE);
    write_json(&params_path, &set.log)?;

    let run = GenerateRun {
        spec,
        series: OutputFile {
            path: SERIES_FILE.into(),
            sha256: file_sha256(&series_path)?,
        },
        params: OutputFile {
            path: PARAMS_FILE.into(),
            sha256: file_sha256(&params_path)?,
        },
        total_jumps,
    };
    record_run("generate", &run, &args.out.join(RUN_FILE))
}
