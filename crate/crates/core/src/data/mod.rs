//! Datasets: synthetic generation, CSV ingestion, sliding windows, splits and
//! max-scaling normalization.

mod ingest;
mod manifest;
mod normalize;
mod prepare;
mod split;
mod synthetic;
mod window;

pub use ingest::{read_series_csv, write_series_csv, Series};
pub use manifest::{sha256_hex, DatasetManifest, SplitCounts, SplitRule};
pub use normalize::{NormScope, NormalizationTable, FLOOR_FRACTION};
pub use prepare::{prepare_dataset, rebuild_dataset, DatasetRecipe, PreparedDataset};
pub use split::{split_by_dates, split_by_fractions, DateRange, Splits};
pub use synthetic::{
    draw_synthetic_params, generate_synthetic, SyntheticParamLog, SyntheticSet, SyntheticSpec,
};
pub use window::{windowize, SeriesWindow, Windowed};
