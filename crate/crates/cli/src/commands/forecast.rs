use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{ArgGroup, Args, ValueEnum};
use log::{info, warn};
use nmjd_core::{
    forecast_windows, prepare_dataset, rebuild_dataset, truncation_error_bound, Baseline,
    DatasetManifest, FitConfig, Forecaster, ModelCheckpoint, SamplingConfig, SeriesWindow,
    SolverMode, Splits, WindowForecast,
};
use serde::Serialize;

use crate::dataset_args::DatasetArgs;
use crate::error::{CliError, CliResult};
use crate::forecast_csv::{write_forecasts, WindowRecord};
use crate::io::{display, file_sha256, read_dataset, record_run, sibling};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    Train,
    Valid,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Vanilla,
    Restart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineChoice {
    Bs,
    Mjd,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("model").required(true).args(["checkpoint", "baseline"])))]
pub struct ForecastArgs {
    /// Series CSV (series_id,date,value[,features...]).
    #[arg(long)]
    pub data: PathBuf,
    /// Trained checkpoint; windowing and normalization come from it.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Stationary baseline fitted to each window's past instead of a network.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineChoice>,
    /// Sampled trajectories per window (0 emits only the mean).
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Solver steps per unit interval.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long, value_enum, default_value_t = SolverChoice::Restart)]
    pub solver: SolverChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Truncation order [default: the checkpoint's, else 5].
    #[arg(long)]
    pub kappa: Option<usize>,
    /// Which split's windows to forecast.
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub windows: SplitChoice,
    /// Forecast CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-step schedules, log-densities and truncation bounds.
    #[arg(long)]
    pub psi: Option<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum Source {
    Checkpoint { path: String, sha256: String },
    Baseline { kind: Baseline, fit: FitConfig },
}

#[derive(Serialize)]
struct ForecastRun<'a> {
    data: String,
    source: Source,
    sampling: SamplingConfig,
    windows: SplitChoice,
    dataset: &'a DatasetManifest,
    out: String,
    psi: Option<String>,
}

fn select(splits: Splits, choice: SplitChoice) -> Vec<SeriesWindow> {
    match choice {
        SplitChoice::Train => splits.train,
        SplitChoice::Valid => splits.valid,
        SplitChoice::Test => splits.test,
        SplitChoice::All => [splits.train, splits.valid, splits.test].concat(),
    }
}

fn write_psi(
    path: &std::path::Path,
    windows: &[SeriesWindow],
    forecasts: &[WindowForecast],
    kappa: usize,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "window",
        "series_id",
        "offset",
        "tau",
        "mu",
        "sigma",
        "lambda",
        "nu",
        "gamma",
        "conditional_mean",
        "log_density",
        "truncation_bound",
        "bound_branch",
    ])?;
    for (i, (win, f)) in windows.iter().zip(forecasts).enumerate() {
        for (t, p) in f.schedule.steps().iter().enumerate() {
            let bound = truncation_error_bound(p, 1.0, kappa)?;
            let psi = f
                .step_log_densities
                .as_ref()
                .map_or(String::new(), |d| d[t].to_string());
            w.write_record([
                i.to_string(),
                win.series_id.clone(),
                win.offset.to_string(),
                (t + 1).to_string(),
                p.mu().to_string(),
                p.sigma().to_string(),
                p.lambda().to_string(),
                p.nu().to_string(),
                p.gamma().to_string(),
                f.bundle.mean[t].to_string(),
                psi,
                bound.value.to_string(),
                serde_json::to_value(bound.branch)?
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &ForecastArgs) -> CliResult<()> {
    let dataset = read_dataset(&args.data)?;
    let checkpoint = args
        .checkpoint
        .as_deref()
        .map(|p| ModelCheckpoint::load(p).map_err(|e| CliError::from(e).context(display(p))))
        .transpose()?;

    let (splits, manifest, source) = match (&checkpoint, args.baseline) {
        (Some(ckpt), _) => {
            if args.dataset.any_set() {
                return Err(CliError::usage(
                    "windowing and split flags come from the checkpoint and cannot be given",
                ));
            }
            let manifest = ckpt
                .data
                .clone()
                .ok_or_else(|| CliError::data("checkpoint records no dataset manifest"))?;
            if manifest.data_sha256 != dataset.sha256 {
                warn!(
                    "{} differs from the training data; reusing the recorded windowing and scales",
                    display(&args.data)
                );
            }
            let splits = rebuild_dataset(&dataset.series, &manifest)?;
            let path = args.checkpoint.as_deref().expect("checkpoint given");
            let source = Source::Checkpoint {
                path: display(path),
                sha256: file_sha256(path)?,
            };
            (splits, manifest, source)
        }
        (None, Some(kind)) => {
            let prepared = prepare_dataset(
                &dataset.series,
                &display(&args.data),
                &dataset.sha256,
                None,
                &args.dataset.recipe()?,
            )?;
            let kind = match kind {
                BaselineChoice::Bs => Baseline::Bs,
                BaselineChoice::Mjd => Baseline::Mjd,
            };
            let source = Source::Baseline {
                kind,
                fit: FitConfig::default(),
            };
            (prepared.splits, prepared.manifest, source)
        }
        (None, None) => unreachable!("clap requires --checkpoint or --baseline"),
    };
    let kappa = args
        .kappa
        .or(checkpoint.as_ref().map(|c| c.model.config.kappa))
        .unwrap_or(5);
    let sampling = SamplingConfig {
        k: args.k,
        steps_per_unit: args.m as usize,
        mode: match args.solver {
            SolverChoice::Vanilla => SolverMode::Vanilla,
            SolverChoice::Restart => SolverMode::Restart,
        },
        seed: args.seed,
        kappa,
    };
    if let Some(ckpt) = &checkpoint {
        if ckpt.model.config.horizon != manifest.t_future {
            return Err(CliError::data(
                "checkpoint horizon differs from its windowing",
            ));
        }
    }
    let windows = select(splits, args.windows);
    if windows.is_empty() {
        return Err(CliError::data(format!(
            "the {:?} split has no windows",
            args.windows
        )));
    }
    let forecaster = match (&checkpoint, &source) {
        (Some(ckpt), _) => Forecaster::Neural(&ckpt.model),
        (None, Source::Baseline { kind, fit }) => Forecaster::Baseline {
            kind: *kind,
            fit: *fit,
        },
        (None, Source::Checkpoint { .. }) => unreachable!("checkpoint source without checkpoint"),
    };
    record_run(
        "forecast",
        &ForecastRun {
            data: display(&args.data),
            source,
            sampling,
            windows: args.windows,
            dataset: &manifest,
            out: display(&args.out),
            psi: args.psi.as_deref().map(display),
        },
        &sibling(&args.out, "run.json"),
    )?;

    let forecasts = forecast_windows(&forecaster, &windows, manifest.t_future, &sampling)?;
    let records: Vec<WindowRecord> = windows
        .iter()
        .zip(&forecasts)
        .enumerate()
        .map(|(i, (w, f))| WindowRecord {
            window: i,
            series_id: w.series_id.clone(),
            segment: w.segment,
            offset: w.offset,
            anchor_date: w.anchor_date.map_or(String::new(), |d| d.to_string()),
            truth: Some(w.future.clone()),
            truth_log_likelihood: f.step_log_densities.as_ref().map(|d| d.iter().sum()),
            bundle: f.bundle.clone(),
        })
        .collect();
    let file = File::create(&args.out)
        .map_err(|e| CliError::data(e.to_string()).context(display(&args.out)))?;
    write_forecasts(BufWriter::new(file), &records)?;
    info!(
        "wrote {} window forecasts to {}",
        records.len(),
        display(&args.out)
    );
    if let Some(path) = &args.psi {
        write_psi(path, &windows, &forecasts, kappa)?;
        info!("wrote diagnostics to {}", display(path));
    }
    Ok(())
}
