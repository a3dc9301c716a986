//! Series to normalized train/valid/test windows, recorded in a
//! [`DatasetManifest`] so the same windows can be rebuilt later.

use super::ingest::Series;
use super::manifest::{DatasetManifest, SplitCounts, SplitRule};
use super::normalize::{NormScope, NormalizationTable};
use super::split::{split_by_dates, split_by_fractions, Splits};
use super::window::windowize;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecipe {
    pub t_past: usize,
    pub t_future: usize,
    pub stride: usize,
    pub split: SplitRule,
    pub scope: NormScope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    /// Normalized windows.
    pub splits: Splits,
    pub manifest: DatasetManifest,
}

fn split_windows(
    series: &[Series],
    t_past: usize,
    t_future: usize,
    stride: usize,
    rule: &SplitRule,
) -> Result<(Splits, usize)> {
    let windowed = windowize(series, t_past, t_future, stride)?;
    let splits = match rule {
        SplitRule::Fractions(f) => split_by_fractions(windowed.windows, *f)?,
        SplitRule::Dates(r) => split_by_dates(windowed.windows, *r)?,
    };
    Ok((splits, windowed.skipped))
}

fn normalize(splits: &mut Splits, table: &NormalizationTable) {
    for part in [&mut splits.train, &mut splits.valid, &mut splits.test] {
        table.apply(part);
    }
}

/// Windows, splits and normalizes `series`, fitting the scales on the
/// training split only. `data_file` and `data_sha256` identify the source.
pub fn prepare_dataset(
    series: &[Series],
    data_file: &str,
    data_sha256: &str,
    seed: Option<u64>,
    recipe: &DatasetRecipe,
) -> Result<PreparedDataset> {
    let (mut splits, skipped) = split_windows(
        series,
        recipe.t_past,
        recipe.t_future,
        recipe.stride,
        &recipe.split,
    )?;
    let table = NormalizationTable::fit(&splits.train, recipe.scope)?;
    normalize(&mut splits, &table);
    let manifest = DatasetManifest {
        data_file: data_file.to_string(),
        data_sha256: data_sha256.to_string(),
        seed,
        t_past: recipe.t_past,
        t_future: recipe.t_future,
        stride: recipe.stride,
        split: recipe.split.clone(),
        counts: SplitCounts {
            train: splits.train.len(),
            valid: splits.valid.len(),
            test: splits.test.len(),
            skipped,
            dropped: splits.dropped,
        },
        normalization_checksum: table.checksum(),
        normalization: table,
    };
    Ok(PreparedDataset { splits, manifest })
}

/// Rebuilds the windows described by `manifest` from `series`, normalized
/// with the recorded scales rather than refitted ones.
pub fn rebuild_dataset(series: &[Series], manifest: &DatasetManifest) -> Result<Splits> {
    let (mut splits, _) = split_windows(
        series,
        manifest.t_past,
        manifest.t_future,
        manifest.stride,
        &manifest.split,
    )?;
    normalize(&mut splits, &manifest.normalization);
    Ok(splits)
}
