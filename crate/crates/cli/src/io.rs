//! File helpers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use nmjd_core::data::sha256_hex;
use nmjd_core::{read_series_csv, Series};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// `dir/name.csv` → `dir/name.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}

pub struct Dataset {
    pub series: Vec<Series>,
    pub sha256: String,
    pub n_features: usize,
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let bytes = fs::read(path).map_err(|e| CliError::data(e.to_string()).context(display(path)))?;
    let series =
        read_series_csv(bytes.as_slice()).map_err(|e| CliError::from(e).context(display(path)))?;
    let n_features = series
        .first()
        .and_then(|s| s.features.first())
        .map_or(0, Vec::len);
    info!(
        "read {} series segments from {}",
        series.len(),
        display(path)
    );
    Ok(Dataset {
        series,
        sha256: sha256_hex(&bytes),
        n_features,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| CliError::data(e.to_string()).context(display(path)))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::data(e.to_string()).context(display(path)))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a T,
}

/// Logs the fully resolved configuration and writes it to `path`.
pub fn record_run<T: Serialize>(command: &str, config: &T, path: &Path) -> CliResult<()> {
    let record = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    info!(
        "resolved configuration:\n{}",
        serde_json::to_string_pretty(&record)?
    );
    write_json(path, &record)?;
    info!("wrote {}", display(path));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_replaces_the_extension() {
        assert_eq!(
            sibling(Path::new("out/f.csv"), "run.json"),
            PathBuf::from("out/f.run.json")
        );
        assert_eq!(
            sibling(Path::new("model.json"), "curve.csv"),
            PathBuf::from("model.curve.csv")
        );
    }
}
