use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::Series;
use crate::error::{Error, Result};

/// One sample: `past` ends at the anchor value `S_0`, `future` holds
/// `S_1..S_{T_f}` (empty at inference). Values are raw; the normalized views
/// need `norm_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWindow {
    pub series_id: String,
    pub segment: usize,
    /// Position of the first past value within its segment.
    pub offset: usize,
    pub group_key: String,
    /// Date of the anchor (last past) value.
    pub anchor_date: Option<NaiveDate>,
    pub past: Vec<f64>,
    pub context: Vec<f64>,
    pub future: Vec<f64>,
    pub norm_scale: Option<f64>,
}

impl SeriesWindow {
    /// A window with no source bookkeeping, grouped under its own id.
    pub fn new(id: impl Into<String>, past: Vec<f64>, future: Vec<f64>) -> Self {
        let id = id.into();
        Self {
            group_key: id.clone(),
            series_id: id,
            segment: 0,
            offset: 0,
            anchor_date: None,
            past,
            context: Vec::new(),
            future,
            norm_scale: None,
        }
    }

    /// The raw anchor value `S_0`.
    pub fn anchor(&self) -> f64 {
        *self.past.last().expect("windows have a non-empty past")
    }

    fn scale(&self) -> Result<f64> {
        self.norm_scale.ok_or_else(|| {
            Error::data(format!(
                "window {}@{} is not normalized",
                self.series_id, self.offset
            ))
        })
    }

    pub fn normalized_past(&self) -> Result<Vec<f64>> {
        let s = self.scale()?;
        Ok(self
            .past
            .iter()
            .map(|v| super::normalize::apply(*v, s))
            .collect())
    }

    pub fn normalized_future(&self) -> Result<Vec<f64>> {
        let s = self.scale()?;
        Ok(self
            .future
            .iter()
            .map(|v| super::normalize::apply(*v, s))
            .collect())
    }

    pub fn normalized_anchor(&self) -> Result<f64> {
        Ok(super::normalize::apply(self.anchor(), self.scale()?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Windowed {
    pub windows: Vec<SeriesWindow>,
    /// Segments too short for a single window.
    pub skipped: usize,
}

/// All windows of `t_past` past and `t_future` future values whose start
/// positions are multiples of `stride`. A segment of length `L` yields
/// `⌊(L − t_past − t_future)/stride⌋ + 1` windows and is skipped when
/// `L < t_past + t_future`.
pub fn windowize(
    series: &[Series],
    t_past: usize,
    t_future: usize,
    stride: usize,
) -> Result<Windowed> {
    if t_past == 0 || stride == 0 {
        return Err(Error::invalid("t_past and stride must be at least 1"));
    }
    let width = t_past + t_future;
    let per_series: Vec<Vec<SeriesWindow>> = series
        .par_iter()
        .map(|s| {
            if s.len() < width {
                return Vec::new();
            }
            (0..=s.len() - width)
                .step_by(stride)
                .map(|start| {
                    let anchor = start + t_past - 1;
                    SeriesWindow {
                        series_id: s.id.clone(),
                        segment: s.segment,
                        offset: start,
                        group_key: s.id.clone(),
                        anchor_date: s.dates.as_ref().map(|d| d[anchor]),
                        past: s.values[start..=anchor].to_vec(),
                        context: s.features.get(anchor).cloned().unwrap_or_default(),
                        future: s.values[anchor + 1..start + width].to_vec(),
                        norm_scale: None,
                    }
                })
                .collect()
        })
        .collect();
    let skipped = series.iter().filter(|s| s.len() < width).count();
    let windows: Vec<SeriesWindow> = per_series.into_iter().flatten().collect();
    if windows.is_empty() {
        return Err(Error::data(format!(
            "no series has the {width} values needed for one window"
        )));
    }
    Ok(Windowed { windows, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize) -> Series {
        Series::from_values("s", (1..=n).map(|v| v as f64).collect())
    }

    #[test]
    fn documented_counts() {
        assert_eq!(
            windowize(&[ramp(100)], 10, 10, 1).unwrap().windows.len(),
            81
        );
        assert_eq!(windowize(&[ramp(21)], 14, 7, 1).unwrap().windows.len(), 1);
        assert_eq!(
            windowize(&[ramp(100)], 10, 10, 5).unwrap().windows.len(),
            17
        );
    }

    #[test]
    fn window_contents() {
        let w = &windowize(&[ramp(10)], 3, 2, 2).unwrap().windows[1];
        assert_eq!(w.offset, 2);
        assert_eq!(w.past, vec![3.0, 4.0, 5.0]);
        assert_eq!(w.future, vec![6.0, 7.0]);
        assert_eq!(w.anchor(), 5.0);
    }

    #[test]
    fn short_series_are_skipped_and_counted() {
        let out = windowize(&[ramp(5), ramp(30)], 10, 10, 1).unwrap();
        assert_eq!(out.skipped, 1);
        assert_eq!(out.windows.len(), 11);
        assert!(windowize(&[ramp(5)], 10, 10, 1).is_err());
    }

    proptest! {
        #[test]
        fn count_formula(len in 1usize..300, tp in 1usize..20, tf in 0usize..20, stride in 1usize..10) {
            let expected = if len >= tp + tf { (len - tp - tf) / stride + 1 } else { 0 };
            match windowize(&[ramp(len)], tp, tf, stride) {
                Ok(w) => {
                    prop_assert_eq!(w.windows.len(), expected);
                    prop_assert!(w.windows.iter().all(|w| w.past.len() == tp && w.future.len() == tf));
                }
                Err(_) => prop_assert_eq!(expected, 0),
            }
        }
    }
}
