use std::path::PathBuf;

use clap::{Args, ValueEnum};
use log::warn;
use nmjd_core::{fit_bs, fit_mjd, BsFit, Error, FitConfig, MjdFit};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{display, read_dataset, record_run, sibling, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Bs,
    Mjd,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Series CSV (series_id,date,value[,features...]).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Mjd)]
    pub model: ModelKind,
    /// Truncation order of the jump-count mixture.
    #[arg(long, default_value_t = 5)]
    pub kappa: usize,
    /// Nelder–Mead starts for the MJD fit.
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Seed of the random starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fitted parameters, one record per series segment (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Fit {
    Bs(BsFit),
    Mjd(MjdFit),
}

#[derive(Debug, Serialize)]
struct SeriesFit {
    series_id: String,
    segment: usize,
    n_values: usize,
    fit: Fit,
}

#[derive(Debug, Serialize)]
struct Skipped {
    series_id: String,
    segment: usize,
    reason: String,
}

#[derive(Debug, Serialize)]
struct CalibrateOutput {
    model: ModelKind,
    kappa: usize,
    fits: Vec<SeriesFit>,
    skipped: Vec<Skipped>,
}

#[derive(Serialize)]
struct CalibrateRun<'a> {
    data: String,
    data_sha256: &'a str,
    model: ModelKind,
    kappa: usize,
    fit: FitConfig,
    out: String,
}

pub fn run(args: &CalibrateArgs) -> CliResult<()> {
    if args.restarts == 0 {
        return Err(CliError::usage("--restarts must be at least 1"));
    }
    let dataset = read_dataset(&args.data)?;
    let fit_config = FitConfig {
        restarts: args.restarts,
        seed: args.seed,
        ..FitConfig::default()
    };
    record_run(
        "calibrate",
        &CalibrateRun {
            data: display(&args.data),
            data_sha256: &dataset.sha256,
            model: args.model,
            kappa: args.kappa,
            fit: fit_config,
            out: display(&args.out),
        },
        &sibling(&args.out, "run.json"),
    )?;

    let results: Vec<Result<Fit, Error>> = dataset
        .series
        .par_iter()
        .map(|s| match args.model {
            ModelKind::Bs => fit_bs(&s.values).map(Fit::Bs),
            ModelKind::Mjd => fit_mjd(&s.values, args.kappa, &fit_config).map(Fit::Mjd),
        })
        .collect();

    let mut output = CalibrateOutput {
        model: args.model,
        kappa: args.kappa,
        fits: vec![],
        skipped: vec![],
    };
    for (s, result) in dataset.series.iter().zip(results) {
        let name = format!("{}#{}", s.id, s.segment);
        match result {
            Ok(fit) => {
                match &fit {
                    Fit::Bs(f) if f.degenerate => {
                        warn!("{name}: degenerate fit, volatility floored to {}", f.sigma)
                    }
                    Fit::Mjd(f) if !f.converged => warn!("{name}: optimizer did not converge"),
                    Fit::Mjd(f) if f.lambda_at_cap => {
                        warn!("{name}: jump intensity at the cap, consider a larger --kappa")
                    }
                    _ => {}
                }
                output.fits.push(SeriesFit {
                    series_id: s.id.clone(),
                    segment: s.segment,
                    n_values: s.values.len(),
                    fit,
                });
            }
            Err(e @ Error::Data(_)) => {
                warn!("{name}: skipped: {e}");
                output.skipped.push(Skipped {
                    series_id: s.id.clone(),
                    segment: s.segment,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(CliError::from(e).context(name)),
        }
    }
    if output.fits.is_empty() {
        return Err(CliError::data("no series could be calibrated"));
    }
    write_json(&args.out, &output)?;
    log::info!("wrote {} fits to {}", output.fits.len(), display(&args.out));
    Ok(())
}
