use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::manifest::sha256_hex;
use super::window::SeriesWindow;
use crate::error::{Error, Result};

/// Normalized values are floored at this fraction of the scale.
pub const FLOOR_FRACTION: f64 = 0.01;

pub(crate) fn apply(value: f64, scale: f64) -> f64 {
    value.max(FLOOR_FRACTION * scale) / scale
}

/// Where a window's scale comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormScope {
    /// Maximum over the training windows of the window's group.
    #[default]
    Group,
    /// Maximum of the window's own past values.
    WindowPast,
}

impl std::str::FromStr for NormScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(Self::Group),
            "window_past" => Ok(Self::WindowPast),
            _ => Err(Error::invalid(format!(
                "unknown normalization scope {s:?} (group|window_past)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTable {
    pub scope: NormScope,
    /// Per-group training maxima (empty for [`NormScope::WindowPast`]).
    pub groups: BTreeMap<String, f64>,
    /// Training maximum over all groups; used for unseen groups.
    pub global: f64,
}

impl NormalizationTable {
    /// Builds the table from training windows only.
    pub fn fit(train: &[SeriesWindow], scope: NormScope) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::data("cannot normalize from an empty training split"));
        }
        let mut groups: BTreeMap<String, f64> = BTreeMap::new();
        for w in train {
            let m = w
                .past
                .iter()
                .chain(&w.future)
                .fold(0.0, |a: f64, b| a.max(*b));
            let e = groups.entry(w.group_key.clone()).or_insert(0.0);
            *e = e.max(m);
        }
        let global = groups.values().fold(0.0, |a: f64, b| a.max(*b));
        if global <= 0.0 {
            return Err(Error::data("training values are all zero; no usable scale"));
        }
        if let Some((g, _)) = groups.iter().find(|(_, m)| **m <= 0.0) {
            return Err(Error::data(format!(
                "group {g} has only zero training values"
            )));
        }
        if scope == NormScope::WindowPast {
            groups.clear();
        }
        Ok(Self {
            scope,
            groups,
            global,
        })
    }

    /// Scale for `window`. Unseen groups, and windows whose past is all zero
    /// under [`NormScope::WindowPast`], fall back to the global scale.
    pub fn scale_for(&self, window: &SeriesWindow) -> f64 {
        match self.scope {
            NormScope::Group => match self.groups.get(&window.group_key) {
                Some(s) => *s,
                None => {
                    warn!(
                        "group {} absent from training split; using global scale",
                        window.group_key
                    );
                    self.global
                }
            },
            NormScope::WindowPast => {
                let m = window.past.iter().fold(0.0, |a: f64, b| a.max(*b));
                if m > 0.0 {
                    m
                } else {
                    warn!(
                        "window {}@{} has an all-zero past; using global scale",
                        window.series_id, window.offset
                    );
                    self.global
                }
            }
        }
    }

    pub fn apply(&self, windows: &mut [SeriesWindow]) {
        for w in windows {
            w.norm_scale = Some(self.scale_for(w));
        }
    }

    /// Maps a normalized value back to raw units.
    pub fn invert(value: f64, scale: f64) -> f64 {
        value * scale
    }

    pub fn checksum(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("table serializes")
                .as_bytes(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(group: &str, past: Vec<f64>, future: Vec<f64>) -> SeriesWindow {
        let mut w = SeriesWindow::new(group, past, future);
        w.group_key = group.into();
        w
    }

    #[test]
    fn group_max_and_floor() {
        let train = [window("g", vec![10.0, 200.0], vec![50.0])];
        let t = NormalizationTable::fit(&train, NormScope::Group).unwrap();
        assert_eq!(t.groups["g"], 200.0);
        assert_eq!(apply(50.0, 200.0), 0.25);
        assert_eq!(apply(0.0, 200.0), 0.01);
    }

    #[test]
    fn unseen_group_uses_global() {
        let train = [
            window("a", vec![4.0], vec![2.0]),
            window("b", vec![8.0], vec![1.0]),
        ];
        let t = NormalizationTable::fit(&train, NormScope::Group).unwrap();
        assert_eq!(t.scale_for(&window("c", vec![1.0], vec![])), 8.0);
        assert_eq!(t.scale_for(&window("a", vec![100.0], vec![])), 4.0);
    }

    #[test]
    fn window_past_scope() {
        let train = [window("a", vec![4.0], vec![2.0])];
        let t = NormalizationTable::fit(&train, NormScope::WindowPast).unwrap();
        let mut w = [window("z", vec![1.0, 3.0], vec![6.0])];
        t.apply(&mut w);
        assert_eq!(w[0].norm_scale, Some(3.0));
        assert_eq!(w[0].normalized_future().unwrap(), vec![2.0]);
        assert!(t.groups.is_empty());
    }

    #[test]
    fn errors() {
        assert!(NormalizationTable::fit(&[], NormScope::Group).is_err());
        assert!(
            NormalizationTable::fit(&[window("a", vec![0.0], vec![0.0])], NormScope::Group)
                .is_err()
        );
    }

    #[test]
    fn checksum_ignores_test_data() {
        let train = vec![window("a", vec![4.0], vec![2.0])];
        let t1 = NormalizationTable::fit(&train, NormScope::Group).unwrap();
        let mut test = [window("a", vec![1e6], vec![1e6])];
        t1.apply(&mut test);
        let t2 = NormalizationTable::fit(&train, NormScope::Group).unwrap();
        assert_eq!(t1.checksum(), t2.checksum());
    }

    proptest! {
        #[test]
        fn round_trip_above_floor(scale in 1e-3f64..1e6, frac in 0.01f64..1.0) {
            let v = frac * scale;
            let back = NormalizationTable::invert(apply(v, scale), scale);
            prop_assert!((back - v).abs() <= 1e-12 * v.max(1.0));
            prop_assert!(apply(v, scale) > 0.0 && apply(v, scale) <= 1.0);
        }
    }
}
