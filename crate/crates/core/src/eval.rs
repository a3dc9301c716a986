//! Point metrics and the Mean, Best-of-K and Probabilistic protocols.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastBundle;

/// `k` in the adjusted-R² penalty `p = (k − 1)(n − 1)/k`.
pub const ADJUSTED_R2_K: f64 = 70.0;

/// How the Probabilistic protocol picks its trajectory.
pub const PROBABILISTIC_RULE: &str =
    "probabilistic = sample with the highest teacher-forced horizon log-likelihood; best-of-K picks each metric independently";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub mae: f64,
    pub mse: f64,
    /// `None` when the truth has zero variance.
    pub r2: Option<f64>,
}

/// MAE, MSE and `R² = 1 − SSE/SST` with `SST` about the truth mean.
pub fn point_metrics(pred: &[f64], truth: &[f64]) -> Result<PointMetrics> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "prediction of length {} against truth of length {}",
            pred.len(),
            truth.len()
        )));
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let (mut abs, mut sse, mut sst) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        abs += (p - t).abs();
        sse += (p - t).powi(2);
        sst += (t - mean).powi(2);
    }
    Ok(PointMetrics {
        mae: abs / n,
        mse: sse / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

/// `1 − (1 − R²)(n − 1)/(n − p − 1)` with `p = (k − 1)(n − 1)/k`, `k = 70`.
pub fn adjusted_r2(r2: f64, n: usize) -> Result<f64> {
    adjusted_r2_with(r2, n, ADJUSTED_R2_K)
}

pub fn adjusted_r2_with(r2: f64, n: usize, k: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("adjusted R² needs n > 1, got {n}")));
    }
    let n = n as f64;
    let p = (k - 1.0) * (n - 1.0) / k;
    let denom = n - p - 1.0;
    if denom.abs() < 1e-12 {
        return Err(Error::numerical("adjusted R² denominator vanishes"));
    }
    Ok(1.0 - (1.0 - r2) * (n - 1.0) / denom)
}

/// Metrics of one window under every protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub mean: PointMetrics,
    /// `None` for deterministic forecasts.
    pub sample_average: Option<PointMetrics>,
    pub per_sample: Vec<PointMetrics>,
    pub best_of_k: Option<PointMetrics>,
    pub probabilistic: Option<PointMetrics>,
    /// Index of the most probable sample.
    pub probable_index: Option<usize>,
}

fn best_of(samples: &[PointMetrics]) -> Option<PointMetrics> {
    let first = samples.first()?;
    let mae = samples.iter().map(|m| m.mae).fold(first.mae, f64::min);
    let mse = samples.iter().map(|m| m.mse).fold(first.mse, f64::min);
    let r2 = samples.iter().filter_map(|m| m.r2).reduce(f64::max);
    Some(PointMetrics { mae, mse, r2 })
}

/// Index of the largest log-likelihood, first on ties; NaN never wins.
fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn window_metrics(bundle: &ForecastBundle, truth: &[f64]) -> Result<WindowMetrics> {
    if bundle.log_likelihoods.len() != bundle.k() {
        return Err(Error::Shape(
            "bundle has a log-likelihood count different from its sample count".into(),
        ));
    }
    let per_sample = bundle
        .samples
        .iter()
        .map(|s| point_metrics(s, truth))
        .collect::<Result<Vec<_>>>()?;
    let probable_index = argmax(&bundle.log_likelihoods);
    Ok(WindowMetrics {
        mean: point_metrics(&bundle.mean, truth)?,
        sample_average: if bundle.k() > 0 {
            Some(point_metrics(&bundle.sample_average(), truth)?)
        } else {
            None
        },
        best_of_k: best_of(&per_sample),
        probabilistic: probable_index.map(|i| per_sample[i]),
        probable_index,
        per_sample,
    })
}

/// Unweighted window averages; `r2` averages the windows where it is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mae: f64,
    pub mse: f64,
    pub r2: Option<f64>,
    pub r2_undefined_windows: usize,
}

fn summarize<'a>(items: impl Iterator<Item = &'a PointMetrics>) -> Option<MetricSummary> {
    let (mut n, mut mae, mut mse, mut r2, mut r2_n, mut undefined) =
        (0usize, 0.0, 0.0, 0.0, 0usize, 0usize);
    for m in items {
        n += 1;
        mae += m.mae;
        mse += m.mse;
        match m.r2 {
            Some(r) => {
                r2 += r;
                r2_n += 1;
            }
            None => undefined += 1,
        }
    }
    (n > 0).then(|| MetricSummary {
        mae: mae / n as f64,
        mse: mse / n as f64,
        r2: (r2_n > 0).then(|| r2 / r2_n as f64),
        r2_undefined_windows: undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub windows: usize,
    pub k: usize,
    pub selection: String,
    pub mean: MetricSummary,
    pub sample_average: Option<MetricSummary>,
    pub best_of_k: Option<MetricSummary>,
    pub probabilistic: Option<MetricSummary>,
}

/// Scores every window's bundle against its truth. Every bundle must hold
/// exactly `k` samples; `k = 0` marks deterministic forecasts, whose
/// stochastic protocols are reported as absent.
pub fn protocol_metrics(
    bundles: &[ForecastBundle],
    truths: &[Vec<f64>],
    k: usize,
) -> Result<ProtocolReport> {
    if bundles.len() != truths.len() || bundles.is_empty() {
        return Err(Error::Shape(format!(
            "{} bundles for {} truths",
            bundles.len(),
            truths.len()
        )));
    }
    if let Some(i) = bundles.iter().position(|b| b.k() != k) {
        return Err(Error::Shape(format!(
            "bundle {i} has {} samples, expected K = {k}",
            bundles[i].k()
        )));
    }
    let per_window: Vec<WindowMetrics> = bundles
        .par_iter()
        .zip(truths.par_iter())
        .map(|(b, t)| window_metrics(b, t))
        .collect::<Result<_>>()?;
    Ok(ProtocolReport {
        windows: per_window.len(),
        k,
        selection: PROBABILISTIC_RULE.into(),
        mean: summarize(per_window.iter().map(|w| &w.mean)).expect("non-empty"),
        sample_average: summarize(per_window.iter().filter_map(|w| w.sample_average.as_ref())),
        best_of_k: summarize(per_window.iter().filter_map(|w| w.best_of_k.as_ref())),
        probabilistic: summarize(per_window.iter().filter_map(|w| w.probabilistic.as_ref())),
    })
}

fn cells(m: Option<&MetricSummary>) -> [String; 3] {
    match m {
        Some(m) => [
            format!("{:.4}", m.mae),
            format!("{:.4}", m.mse),
            m.r2.map_or("undef".into(), |r| format!("{r:.4}")),
        ],
        None => ["N/A".into(), "N/A".into(), "N/A".into()],
    }
}

/// Aligned text table, one row per method:
/// `MAE MSE R² | minMAE minMSE maxR² | p-MAE p-MSE p-R²`.
pub fn render_table(rows: &[(String, ProtocolReport)]) -> String {
    let header = [
        "Method", "MAE", "MSE", "R2", "|", "minMAE", "minMSE", "maxR2", "|", "p-MAE", "p-MSE",
        "p-R2",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (name, r) in rows {
        let mut row = vec![name.clone()];
        row.extend(cells(Some(&r.mean)));
        row.push("|".into());
        row.extend(cells(r.best_of_k.as_ref()));
        row.push("|".into());
        row.extend(cells(r.probabilistic.as_ref()));
        table.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bundle(samples: Vec<Vec<f64>>, lls: Vec<f64>, mean: Vec<f64>) -> ForecastBundle {
        ForecastBundle {
            samples,
            log_likelihoods: lls,
            mean,
        }
    }

    #[test]
    fn point_metric_examples() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(
            point_metrics(&t, &t).unwrap(),
            PointMetrics {
                mae: 0.0,
                mse: 0.0,
                r2: Some(1.0)
            }
        );
        assert_eq!(point_metrics(&[2.0; 3], &t).unwrap().r2, Some(0.0));
        let m = point_metrics(&[1.0, 2.0, 5.0], &t).unwrap();
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15 && (m.mse - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.r2, Some(-1.0));
        assert_eq!(point_metrics(&[1.0, 2.0], &[4.0, 4.0]).unwrap().r2, None);
        assert!(point_metrics(&[1.0], &[1.0, 2.0]).is_err());
        assert!(point_metrics(&[], &[]).is_err());
    }

    #[test]
    fn adjusted_r2_examples() {
        assert_eq!(adjusted_r2(1.0, 10).unwrap(), 1.0);
        assert!((adjusted_r2(0.95, 71).unwrap() + 2.5).abs() < 1e-9);
        assert!(adjusted_r2(0.5, 1).is_err());
        assert!(adjusted_r2_with(0.5, 3, 1.0).is_ok());
    }

    #[test]
    fn deterministic_bundles_report_na() {
        let b = bundle(vec![], vec![], vec![1.0, 2.0]);
        let r = protocol_metrics(&[b], &[vec![1.0, 2.0]], 0).unwrap();
        assert_eq!(r.mean.mae, 0.0);
        assert!(r.best_of_k.is_none() && r.probabilistic.is_none());
        let table = render_table(&[("det".into(), r)]);
        assert!(table.contains("N/A") && table.lines().count() == 2);
    }

    #[test]
    fn exact_sample_gives_zero_min_mae_and_k_mismatch_errors() {
        let truth = vec![1.0, 2.0, 3.0];
        let b = bundle(
            vec![vec![0.0; 3], truth.clone()],
            vec![0.0, -1.0],
            vec![2.0; 3],
        );
        let r =
            protocol_metrics(std::slice::from_ref(&b), std::slice::from_ref(&truth), 2).unwrap();
        assert_eq!(r.best_of_k.unwrap().mae, 0.0);
        assert_eq!(r.probabilistic.unwrap().mae, 2.0);
        assert!(protocol_metrics(&[b], &[truth], 3).is_err());
    }

    fn arb_bundle() -> impl Strategy<Value = (ForecastBundle, Vec<f64>)> {
        (1usize..6, 2usize..8).prop_flat_map(|(k, h)| {
            (
                prop::collection::vec(prop::collection::vec(0.1f64..10.0, h), k),
                prop::collection::vec(-50.0f64..50.0, k),
                prop::collection::vec(0.1f64..10.0, h),
                prop::collection::vec(0.1f64..10.0, h),
            )
                .prop_map(|(s, l, m, t)| (bundle(s, l, m), t))
        })
    }

    proptest! {
        #[test]
        fn order_statistics((b, truth) in arb_bundle()) {
            let w = window_metrics(&b, &truth).unwrap();
            let k = w.per_sample.len() as f64;
            let best = w.best_of_k.unwrap();
            prop_assert!(best.mae <= w.per_sample.iter().map(|m| m.mae).sum::<f64>() / k + 1e-12);
            prop_assert!(best.mse <= w.per_sample.iter().map(|m| m.mse).sum::<f64>() / k + 1e-12);
            if let Some(r) = best.r2 {
                let avg = w.per_sample.iter().filter_map(|m| m.r2).sum::<f64>() / k;
                prop_assert!(r >= avg - 1e-12);
            }
        }

        #[test]
        fn single_sample_protocols_coincide((b, truth) in arb_bundle()) {
            // the closed-form mean is a separate trajectory; the sampled average is not
            let one = bundle(vec![b.samples[0].clone()], vec![b.log_likelihoods[0]], b.mean.clone());
            let r = protocol_metrics(&[one], &[truth], 1).unwrap();
            let best = r.best_of_k.unwrap();
            prop_assert_eq!(r.sample_average.unwrap(), best);
            prop_assert_eq!(best, r.probabilistic.unwrap());
        }

        #[test]
        fn argmax_is_shift_invariant((b, truth) in arb_bundle(), c in -1e3f64..1e3) {
            let mut shifted = b.clone();
            shifted.log_likelihoods.iter_mut().for_each(|l| *l += c);
            let before = window_metrics(&b, &truth).unwrap();
            let after = window_metrics(&shifted, &truth).unwrap();
            prop_assert_eq!(before.probable_index, after.probable_index);
        }

        #[test]
        fn adjusted_factor_is_seventy(m in 1usize..500, r2 in -5.0f64..1.0) {
            let n = 70 * m + 1;
            let adj = adjusted_r2(r2, n).unwrap();
            prop_assert!((adj - (1.0 - 70.0 * (1.0 - r2))).abs() < 1e-9 * (1.0 + (1.0 - r2) * 70.0));
        }
    }
}
