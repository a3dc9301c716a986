use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::window::SeriesWindow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<SeriesWindow>,
    pub valid: Vec<SeriesWindow>,
    pub test: Vec<SeriesWindow>,
    /// Windows outside every date range.
    pub dropped: usize,
}

/// Splits whole series in order of first appearance: the first
/// `round(f_train·n)` series train, the next `round(f_valid·n)` validate,
/// the rest test. No series contributes windows to two splits.
pub fn split_by_fractions(windows: Vec<SeriesWindow>, fractions: [f64; 3]) -> Result<Splits> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let mut rank: HashMap<String, usize> = HashMap::new();
    for w in &windows {
        let next = rank.len();
        rank.entry(w.series_id.clone()).or_insert(next);
    }
    let n = rank.len();
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_valid = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let mut out = Splits::default();
    for w in windows {
        let r = rank[&w.series_id];
        if r < n_train {
            out.train.push(w);
        } else if r < n_train + n_valid {
            out.valid.push(w);
        } else {
            out.test.push(w);
        }
    }
    if out.test.is_empty() {
        return Err(Error::data(format!(
            "split of {n} series leaves the test split empty"
        )));
    }
    Ok(out)
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!(
                "date range {start}..{end} is reversed"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl std::str::FromStr for DateRange {
    type Err = Error;
    /// Parses `START..END` with ISO dates.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once("..").ok_or_else(|| {
            Error::invalid(format!(
                "date range {s:?} must look like 2016-01-01..2016-12-31"
            ))
        })?;
        let parse = |d: &str| {
            NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("bad date {d:?}: {e}")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

/// Assigns each window to the range holding its anchor (last past) date, so a
/// window whose forecast crosses a boundary belongs to its anchor's split.
pub fn split_by_dates(windows: Vec<SeriesWindow>, ranges: [DateRange; 3]) -> Result<Splits> {
    for i in 0..3 {
        for j in i + 1..3 {
            if ranges[i].overlaps(&ranges[j]) {
                return Err(Error::invalid(format!("date ranges {i} and {j} overlap")));
            }
        }
    }
    let mut out = Splits::default();
    for w in windows {
        let d = w
            .anchor_date
            .ok_or_else(|| Error::data(format!("window of series {} has no date", w.series_id)))?;
        match ranges.iter().position(|r| r.contains(d)) {
            Some(0) => out.train.push(w),
            Some(1) => out.valid.push(w),
            Some(_) => out.test.push(w),
            None => out.dropped += 1,
        }
    }
    if out.test.is_empty() {
        return Err(Error::data("no window is anchored in the test date range"));
    }
    Ok(out)
}
