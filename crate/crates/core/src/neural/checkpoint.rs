//! Checkpoint files: a JSON manifest next to a little-endian `f64` blob.
//!
//! Blob layout: the 8-byte magic `NMJDWTS\0`, a `u32` format version, a zero
//! `u32`, a `u64` value count, then the values. The manifest lists named
//! blocks as `(offset, len)` in values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::mlp::{LayerShape, Mlp};
use super::model::NeuralModel;
use super::train::{AdamState, EpochRecord, StopReason, TrainOutcome, TrainState};
use crate::data::{sha256_hex, DatasetManifest, NormalizationTable};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NMJDWTS\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    /// Epoch of the saved weights.
    pub epoch: usize,
    pub best_valid_loss: f64,
    pub seed: u64,
    pub epochs_run: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub model: NeuralModel,
    pub normalization: NormalizationTable,
    /// How the training windows were built.
    pub data: Option<DatasetManifest>,
    pub train_meta: TrainMeta,
    pub resume: Option<TrainState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Block {
    name: String,
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResumeMeta {
    epoch: usize,
    adam_step: u64,
    best_valid: f64,
    best_epoch: usize,
    stale_epochs: usize,
    history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: NetworkConfig,
    layout: Vec<LayerShape>,
    blob_file: String,
    blob_sha256: String,
    blocks: Vec<Block>,
    normalization: NormalizationTable,
    data: Option<DatasetManifest>,
    train_meta: TrainMeta,
    resume: Option<ResumeMeta>,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

impl ModelCheckpoint {
    pub fn from_outcome(
        outcome: TrainOutcome,
        normalization: NormalizationTable,
        data: Option<DatasetManifest>,
    ) -> Self {
        let TrainOutcome { model, state, stop } = outcome;
        let train_meta = TrainMeta {
            epoch: state.best_epoch,
            best_valid_loss: state.best_valid,
            seed: model.config.seed,
            epochs_run: state.epoch,
            stop,
        };
        Self {
            model,
            normalization,
            data,
            train_meta,
            resume: Some(state),
        }
    }

    /// Writes the manifest to `path` and the weights next to it with a
    /// `.bin` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut values: Vec<f64> = Vec::new();
        let mut blocks = Vec::new();
        let mut push = |name: &str, data: &[f64]| {
            blocks.push(Block {
                name: name.into(),
                offset: values.len(),
                len: data.len(),
            });
            values.extend_from_slice(data);
        };
        push("weights", self.model.net.params());
        if let Some(s) = &self.resume {
            push("current", &s.current);
            push("adam_m", &s.optimizer.m);
            push("adam_v", &s.optimizer.v);
        }
        let mut blob = Vec::with_capacity(HEADER_LEN + 8 * values.len());
        blob.extend_from_slice(MAGIC);
        blob.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        blob.extend_from_slice(&0u32.to_le_bytes());
        blob.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in &values {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        let bin = blob_path(path);
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.model.config.clone(),
            layout: self.model.net.layout().to_vec(),
            blob_file: bin
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::invalid(format!("bad checkpoint path {}", path.display())))?
                .to_string(),
            blob_sha256: sha256_hex(&blob),
            blocks,
            normalization: self.normalization.clone(),
            data: self.data.clone(),
            train_meta: self.train_meta.clone(),
            resume: self.resume.as_ref().map(|s| ResumeMeta {
                epoch: s.epoch,
                adam_step: s.optimizer.step,
                best_valid: s.best_valid,
                best_epoch: s.best_epoch,
                stale_epochs: s.stale_epochs,
                history: s.history.clone(),
            }),
        };
        fs::write(&bin, &blob)?;
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "checkpoint format {} is not the supported {FORMAT_VERSION}",
                manifest.format_version
            )));
        }
        let bin = path.with_file_name(&manifest.blob_file);
        let blob = fs::read(&bin)?;
        if sha256_hex(&blob) != manifest.blob_sha256 {
            return Err(Error::data(format!(
                "{} does not match its manifest checksum",
                bin.display()
            )));
        }
        if blob.len() < HEADER_LEN || &blob[..8] != MAGIC {
            return Err(Error::data(format!(
                "{} is not a weight blob",
                bin.display()
            )));
        }
        let version = u32::from_le_bytes(blob[8..12].try_into().expect("4 bytes"));
        let count = u64::from_le_bytes(blob[16..24].try_into().expect("8 bytes")) as usize;
        if version != FORMAT_VERSION || blob.len() != HEADER_LEN + 8 * count {
            return Err(Error::data(format!("{} has a bad header", bin.display())));
        }
        let values: Vec<f64> = blob[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let block = |name: &str| -> Result<Vec<f64>> {
            let b = manifest
                .blocks
                .iter()
                .find(|b| b.name == name)
                .ok_or_else(|| Error::data(format!("checkpoint has no {name} block")))?;
            values
                .get(b.offset..b.offset + b.len)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::data(format!("block {name} overruns the blob")))
        };

        let net = Mlp::from_parts(manifest.layout.clone(), block("weights")?)
            .ok_or_else(|| Error::data("weight count does not match the layout"))?;
        let model = NeuralModel::from_parts(manifest.config, net)?;
        if manifest.normalization.global <= 0.0
            || manifest.normalization.groups.values().any(|s| *s <= 0.0)
        {
            return Err(Error::data(
                "checkpoint normalization scales must be positive",
            ));
        }
        let resume = match manifest.resume {
            Some(r) => Some(TrainState {
                epoch: r.epoch,
                current: block("current")?,
                optimizer: AdamState {
                    step: r.adam_step,
                    m: block("adam_m")?,
                    v: block("adam_v")?,
                },
                best: model.net.params().to_vec(),
                best_valid: r.best_valid,
                best_epoch: r.best_epoch,
                stale_epochs: r.stale_epochs,
                history: r.history,
            }),
            None => None,
        };
        Ok(Self {
            model,
            normalization: manifest.normalization,
            data: manifest.data,
            train_meta: manifest.train_meta,
            resume,
        })
    }
}
