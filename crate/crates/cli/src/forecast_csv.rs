//! Forecast files: one row per trajectory per window, values at `t1..tT`.
//!
//! `kind` is `truth`, `mean` or `sample`; `sample` carries the draw index.
//! `log_likelihood` is the sample's own teacher-forced horizon
//! log-likelihood, or the mean-bootstrapped log-likelihood of the truth.

use std::io::{Read, Write};

use nmjd_core::ForecastBundle;

use crate::error::{CliError, CliResult};

const FIXED_COLUMNS: [&str; 8] = [
    "window",
    "series_id",
    "segment",
    "offset",
    "anchor_date",
    "kind",
    "sample",
    "log_likelihood",
];

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub window: usize,
    pub series_id: String,
    pub segment: usize,
    pub offset: usize,
    pub anchor_date: String,
    pub truth: Option<Vec<f64>>,
    pub truth_log_likelihood: Option<f64>,
    pub bundle: ForecastBundle,
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn write_forecasts<W: Write>(writer: W, records: &[WindowRecord]) -> CliResult<()> {
    let horizon = records.first().map_or(0, |r| r.bundle.horizon());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend((1..=horizon).map(|t| format!("t{t}")));
    w.write_record(&header)?;
    for r in records {
        if r.bundle.horizon() != horizon {
            return Err(CliError::data("forecast windows have different horizons"));
        }
        let mut row = |kind: &str, sample: String, ll: String, values: &[f64]| {
            let mut rec = vec![
                r.window.to_string(),
                r.series_id.clone(),
                r.segment.to_string(),
                r.offset.to_string(),
                r.anchor_date.clone(),
                kind.to_string(),
                sample,
                ll,
            ];
            rec.extend(values.iter().map(f64::to_string));
            w.write_record(&rec)
        };
        if let Some(truth) = &r.truth {
            row("truth", String::new(), opt(r.truth_log_likelihood), truth)?;
        }
        row("mean", String::new(), String::new(), &r.bundle.mean)?;
        for (j, (s, ll)) in r
            .bundle
            .samples
            .iter()
            .zip(&r.bundle.log_likelihoods)
            .enumerate()
        {
            row("sample", j.to_string(), ll.to_string(), s)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: u64) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    field
        .parse()
        .map_err(|e| CliError::data(format!("line {line}: bad {what} {field:?}: {e}")))
}

pub fn read_forecasts<R: Read>(reader: R) -> CliResult<Vec<WindowRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len() + 1
        || header.iter().zip(FIXED_COLUMNS).any(|(a, b)| a != b)
    {
        return Err(CliError::data(format!(
            "forecast header must start with {} followed by t1..tT",
            FIXED_COLUMNS.join(",")
        )));
    }
    let horizon = header.len() - FIXED_COLUMNS.len();
    let mut out: Vec<WindowRecord> = vec![];
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let window: usize = parse(&rec[0], "window", line)?;
        let values = (FIXED_COLUMNS.len()..rec.len())
            .map(|i| parse::<f64>(&rec[i], "value", line))
            .collect::<CliResult<Vec<_>>>()?;
        if values.len() != horizon {
            return Err(CliError::data(format!(
                "line {line}: expected {horizon} values"
            )));
        }
        let ll = match &rec[7] {
            "" => None,
            s => Some(parse::<f64>(s, "log_likelihood", line)?),
        };
        if out.last().is_none_or(|w| w.window != window) {
            if out.iter().any(|w| w.window == window) {
                return Err(CliError::data(format!(
                    "line {line}: rows of window {window} are not contiguous"
                )));
            }
            out.push(WindowRecord {
                window,
                series_id: rec[1].to_string(),
                segment: parse(&rec[2], "segment", line)?,
                offset: parse(&rec[3], "offset", line)?,
                anchor_date: rec[4].to_string(),
                truth: None,
                truth_log_likelihood: None,
                bundle: ForecastBundle {
                    samples: vec![],
                    log_likelihoods: vec![],
                    mean: vec![],
                },
            });
        }
        let w = out.last_mut().expect("pushed above");
        match &rec[5] {
            "truth" => {
                w.truth = Some(values);
                w.truth_log_likelihood = ll;
            }
            "mean" => w.bundle.mean = values,
            "sample" => {
                w.bundle.samples.push(values);
                w.bundle.log_likelihoods.push(ll.unwrap_or(f64::NAN));
            }
            other => {
                return Err(CliError::data(format!(
                    "line {line}: unknown row kind {other:?}"
                )))
            }
        }
    }
    for w in &out {
        if w.bundle.mean.is_empty() {
            return Err(CliError::data(format!(
                "window {} has no mean row",
                w.window
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(window: usize, k: usize, with_truth: bool) -> WindowRecord {
        WindowRecord {
            window,
            series_id: format!("s{window}"),
            segment: 0,
            offset: 3,
            anchor_date: String::new(),
            truth: with_truth.then(|| vec![1.0, 2.5]),
            truth_log_likelihood: with_truth.then_some(-1.25),
            bundle: ForecastBundle {
                samples: (0..k).map(|j| vec![j as f64, 0.1 + j as f64]).collect(),
                log_likelihoods: (0..k).map(|j| -(j as f64) / 3.0).collect(),
                mean: vec![1.0 / 3.0, 2.0],
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let records = vec![record(0, 3, true), record(1, 3, false), record(2, 0, true)];
        let mut buf = vec![];
        write_forecasts(&mut buf, &records).unwrap();
        let back = read_forecasts(buf.as_slice()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn rejects_foreign_headers_and_split_windows() {
        assert!(read_forecasts("a,b\n1,2\n".as_bytes()).is_err());
        let text = "window,series_id,segment,offset,anchor_date,kind,sample,log_likelihood,t1\n\
                    0,a,0,0,,mean,,,1\n1,b,0,0,,mean,,,1\n0,a,0,0,,sample,0,-1,1\n";
        assert!(read_forecasts(text.as_bytes()).is_err());
    }
}
