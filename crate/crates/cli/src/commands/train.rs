use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use log::{error, info};
use nmjd_core::neural::StopReason;
use nmjd_core::{
    prepare_dataset, rebuild_dataset, train, DatasetManifest, ModelCheckpoint, NetworkConfig,
    Splits,
};
use serde::Serialize;

use crate::dataset_args::DatasetArgs;
use crate::error::{CliError, CliResult};
use crate::io::{display, read_dataset, record_run, sibling};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Series CSV (series_id,date,value[,features...]).
    #[arg(long)]
    pub data: PathBuf,
    /// Network and optimizer configuration (JSON). Optional with --resume.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configuration epoch budget (counted from epoch 0).
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Checkpoint manifest to write; weights go next to it as .bin.
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint to continue training from. Its windowing is reused.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
}

#[derive(Serialize)]
struct TrainRun<'a> {
    data: String,
    resume: Option<String>,
    network: &'a NetworkConfig,
    dataset: &'a DatasetManifest,
    out: String,
    curve: String,
}

pub fn load_config(path: &Path) -> CliResult<NetworkConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(e.to_string()).context(display(path)))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(e.to_string()).context(format!("config {}", display(path))))
}

fn same_architecture(a: &NetworkConfig, b: &NetworkConfig) -> bool {
    a.input_width == b.input_width
        && a.hidden_sizes == b.hidden_sizes
        && a.horizon == b.horizon
        && a.activation == b.activation
        && a.jumps == b.jumps
}

fn write_curve(path: &Path, outcome_history: &[nmjd_core::neural::EpochRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_loss", "valid_loss"])?;
    for r in outcome_history {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.valid_loss.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let dataset = read_dataset(&args.data)?;
    let previous = args
        .resume
        .as_deref()
        .map(|p| ModelCheckpoint::load(p).map_err(|e| CliError::from(e).context(display(p))))
        .transpose()?;

    let mut config = match (&args.config, &previous) {
        (Some(path), _) => load_config(path)?,
        (None, Some(ckpt)) => ckpt.model.config.clone(),
        (None, None) => {
            return Err(CliError::usage(
                "--config is required unless --resume is given",
            ))
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.max_epochs {
        config.max_epochs = epochs;
    }
    config.validate()?;

    let (splits, manifest, resume_state): (Splits, DatasetManifest, _) = match previous {
        Some(ckpt) => {
            if args.dataset.any_set() {
                return Err(CliError::usage(
                    "windowing and split flags cannot be combined with --resume",
                ));
            }
            if !same_architecture(&ckpt.model.config, &config) {
                return Err(CliError::usage(
                    "the configuration does not match the checkpoint architecture",
                ));
            }
            let manifest = ckpt
                .data
                .ok_or_else(|| CliError::data("checkpoint records no dataset manifest"))?;
            if manifest.data_sha256 != dataset.sha256 {
                return Err(CliError::data(format!(
                    "{} differs from the data the checkpoint was trained on",
                    display(&args.data)
                )));
            }
            let state = ckpt
                .resume
                .ok_or_else(|| CliError::data("checkpoint carries no optimizer state"))?;
            info!("resuming after epoch {}", state.epoch);
            let splits = rebuild_dataset(&dataset.series, &manifest)?;
            (splits, manifest, Some(state))
        }
        None => {
            let recipe = args.dataset.recipe()?;
            let prepared = prepare_dataset(
                &dataset.series,
                &display(&args.data),
                &dataset.sha256,
                None,
                &recipe,
            )?;
            (prepared.splits, prepared.manifest, None)
        }
    };
    if config.input_width != manifest.t_past + dataset.n_features {
        return Err(CliError::usage(format!(
            "input_width {} must equal t_past {} plus {} feature columns",
            config.input_width, manifest.t_past, dataset.n_features
        )));
    }
    if config.horizon != manifest.t_future {
        return Err(CliError::usage(format!(
            "horizon {} must equal t_future {}",
            config.horizon, manifest.t_future
        )));
    }
    let curve_path = sibling(&args.out, "curve.csv");
    record_run(
        "train",
        &TrainRun {
            data: display(&args.data),
            resume: args.resume.as_deref().map(display),
            network: &config,
            dataset: &manifest,
            out: display(&args.out),
            curve: display(&curve_path),
        },
        &sibling(&args.out, "run.json"),
    )?;
    info!(
        "windows: {} train, {} valid, {} test",
        splits.train.len(),
        splits.valid.len(),
        splits.test.len()
    );

    let outcome = train(&config, &splits.train, &splits.valid, resume_state)?;
    for r in &outcome.state.history {
        info!(
            "epoch {:>3}  train {:.6}  valid {:.6}",
            r.epoch, r.train_loss, r.valid_loss
        );
    }
    let stop = outcome.stop.clone();
    write_curve(&curve_path, &outcome.state.history)?;
    let normalization = manifest.normalization.clone();
    let checkpoint = ModelCheckpoint::from_outcome(outcome, normalization, Some(manifest));
    checkpoint.save(&args.out)?;
    info!(
        "best validation loss {:.6} at epoch {}; wrote {}",
        checkpoint.train_meta.best_valid_loss,
        checkpoint.train_meta.epoch,
        display(&args.out)
    );
    match stop {
        StopReason::Diverged { epoch, detail } => {
            error!("training diverged in epoch {epoch}: {detail}");
            Err(CliError::numerical(format!(
                "training diverged in epoch {epoch}; the checkpoint holds the best earlier weights"
            )))
        }
        StopReason::EarlyStopped => {
            info!(
                "stopped early after epoch {}",
                checkpoint.train_meta.epochs_run
            );
            Ok(())
        }
        StopReason::MaxEpochs => Ok(()),
    }
}
