use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::normalize::NormalizationTable;
use super::split::DateRange;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    /// Segments shorter than one window.
    pub skipped: usize,
    /// Windows outside every date range.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    Fractions([f64; 3]),
    Dates([DateRange; 3]),
}

/// Everything needed to rebuild a windowed, split, normalized dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub data_file: String,
    pub data_sha256: String,
    pub seed: Option<u64>,
    pub t_past: usize,
    pub t_future: usize,
    pub stride: usize,
    pub split: SplitRule,
    pub counts: SplitCounts,
    pub normalization: NormalizationTable,
    pub normalization_checksum: String,
}
