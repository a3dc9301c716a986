//! Windowing, split and normalization flags shared by `train` and baseline
//! `forecast`.

use clap::Args;
use nmjd_core::{DatasetRecipe, DateRange, NormScope, SplitRule};

use crate::error::{CliError, CliResult};

pub const DEFAULT_T_PAST: usize = 10;
pub const DEFAULT_T_FUTURE: usize = 10;
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Debug, Clone, Default, Args)]
pub struct DatasetArgs {
    /// Past values per window [default: 10].
    #[arg(long)]
    pub t_past: Option<usize>,
    /// Future values per window [default: 10].
    #[arg(long)]
    pub t_future: Option<usize>,
    /// Offset between consecutive window starts [default: 1].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Train,valid,test fractions of whole series [default: 0.6,0.2,0.2].
    #[arg(long, value_name = "F,F,F", conflicts_with = "split_dates")]
    pub split: Option<String>,
    /// Train,valid,test anchor-date ranges, e.g.
    /// 2016-01-01..2018-12-31,2019-01-01..2019-06-30,2019-07-01..2019-12-31.
    #[arg(long, value_name = "A..B,C..D,E..F")]
    pub split_dates: Option<String>,
    /// Normalization scale source: group | window_past [default: group].
    #[arg(long)]
    pub norm: Option<String>,
}

impl DatasetArgs {
    pub fn any_set(&self) -> bool {
        self.t_past.is_some()
            || self.t_future.is_some()
            || self.stride.is_some()
            || self.split.is_some()
            || self.split_dates.is_some()
            || self.norm.is_some()
    }

    pub fn recipe(&self) -> CliResult<DatasetRecipe> {
        let split = match (&self.split, &self.split_dates) {
            (_, Some(d)) => SplitRule::Dates(parse_date_ranges(d)?),
            (Some(f), None) => SplitRule::Fractions(parse_fractions(f)?),
            (None, None) => SplitRule::Fractions(DEFAULT_FRACTIONS),
        };
        let scope = match &self.norm {
            Some(s) => s.parse::<NormScope>()?,
            None => NormScope::default(),
        };
        Ok(DatasetRecipe {
            t_past: self.t_past.unwrap_or(DEFAULT_T_PAST),
            t_future: self.t_future.unwrap_or(DEFAULT_T_FUTURE),
            stride: self.stride.unwrap_or(1),
            split,
            scope,
        })
    }
}

fn three<T>(items: Vec<T>, what: &str, raw: &str) -> CliResult<[T; 3]> {
    items
        .try_into()
        .map_err(|_| CliError::usage(format!("{what} {raw:?} needs exactly three entries")))
}

pub fn parse_fractions(raw: &str) -> CliResult<[f64; 3]> {
    let values = raw
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| CliError::usage(format!("bad split fraction {f:?}: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    three(values, "--split", raw)
}

pub fn parse_date_ranges(raw: &str) -> CliResult<[DateRange; 3]> {
    let ranges = raw
        .split(',')
        .map(|r| r.parse::<DateRange>().map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    three(ranges, "--split-dates", raw)
}
