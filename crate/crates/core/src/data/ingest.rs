use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A gap-free run of one source series at unit spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: String,
    /// Index of this run within its source series.
    pub segment: usize,
    pub values: Vec<f64>,
    /// One entry per value when the source carried dates.
    pub dates: Option<Vec<NaiveDate>>,
    /// Per-row feature vectors (empty rows when there are no feature columns).
    pub features: Vec<Vec<f64>>,
}

impl Series {
    /// A dateless, featureless series.
    pub fn from_values(id: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            id: id.into(),
            segment: 0,
            values,
            dates: None,
            features: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

#[derive(Default)]
struct Builder {
    segments: Vec<Series>,
    open: bool,
    last_date: Option<NaiveDate>,
}

/// Reads the long format `series_id,date,value[,feature...]`.
///
/// Rows of a series keep file order. A missing value (empty, `NA`, `NaN`)
/// closes the current segment, so no window spans it. The date column may be
/// empty throughout a series; otherwise every present-value row needs an
/// ISO-8601 date and dates must increase strictly. Values must be finite and
/// non-negative.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<Series>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["series_id", "date", "value"];
    if headers.len() < 3 || headers.iter().take(3).ne(expected) {
        return Err(Error::data(format!(
            "CSV header must start with series_id,date,value; got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let n_features = headers.len() - 3;

    let mut order: Vec<String> = Vec::new();
    let mut builders: BTreeMap<String, Builder> = BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let id = record[0].to_string();
        let b = builders.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Builder::default()
        });
        if is_missing(&record[2]) {
            b.open = false;
            continue;
        }
        let value: f64 = record[2].parse().map_err(|_| {
            Error::data(format!("row {row}: value {:?} is not a number", &record[2]))
        })?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::data(format!(
                "row {row}: value {value} must be finite and non-negative"
            )));
        }
        let date = match record[1].trim() {
            "" => None,
            d => Some(
                NaiveDate::parse_from_str(d, "%Y-%m-%d")
                    .map_err(|e| Error::data(format!("row {row}: bad date {d:?}: {e}")))?,
            ),
        };
        if let (Some(prev), Some(d)) = (b.last_date, date) {
            if d <= prev {
                return Err(Error::data(format!(
                    "row {row}: date {d} does not follow {prev} in series {id}"
                )));
            }
        }
        let features = (0..n_features)
            .map(|j| {
                record[3 + j].parse::<f64>().map_err(|_| {
                    Error::data(format!(
                        "row {row}: feature {:?} is not a number",
                        &record[3 + j]
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        if !b.open {
            b.segments.push(Series {
                id: id.clone(),
                segment: b.segments.len(),
                values: Vec::new(),
                dates: date.map(|_| Vec::new()),
                features: Vec::new(),
            });
            b.open = true;
        }
        let seg = b.segments.last_mut().expect("segment opened above");
        match (&mut seg.dates, date) {
            (Some(ds), Some(d)) => ds.push(d),
            (None, None) => {}
            _ => {
                return Err(Error::data(format!(
                    "row {row}: series {id} mixes dated and undated rows"
                )))
            }
        }
        seg.values.push(value);
        seg.features.push(features);
        b.last_date = date.or(b.last_date);
    }

    Ok(order
        .into_iter()
        .flat_map(|id| builders.remove(&id).expect("registered id").segments)
        .collect())
}

/// Writes series in the long format read by [`read_series_csv`]. Segments of
/// the same id are separated by a missing-value row.
pub fn write_series_csv<W: Write>(
    writer: W,
    series: &[Series],
    feature_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "series_id".to_string(),
        "date".to_string(),
        "value".to_string(),
    ];
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    let mut prev_id: Option<&str> = None;
    for s in series {
        if s.features.iter().any(|f| f.len() != feature_names.len()) {
            return Err(Error::Shape(format!(
                "series {} has a feature row of the wrong width",
                s.id
            )));
        }
        if prev_id == Some(s.id.as_str()) {
            let mut gap = vec![s.id.clone(), String::new(), String::new()];
            gap.extend(feature_names.iter().map(|_| String::new()));
            w.write_record(&gap)?;
        }
        for (i, v) in s.values.iter().enumerate() {
            let mut rec = vec![
                s.id.clone(),
                s.dates.as_ref().map_or(String::new(), |d| d[i].to_string()),
                v.to_string(),
            ];
            rec.extend(s.features[i].iter().map(|f| f.to_string()));
            w.write_record(&rec)?;
        }
        prev_id = Some(&s.id);
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_split_segments() {
        let csv = "series_id,date,value,vol\n\
                   a,2016-01-01,1.0,3\n\
                   a,2016-01-02,2.0,4\n\
                   a,2016-01-03,NA,0\n\
                   a,2016-01-04,3.0,5\n\
                   b,,7.5,1\n";
        let s = read_series_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(
            (s[0].id.as_str(), s[0].segment, s[0].values.clone()),
            ("a", 0, vec![1.0, 2.0])
        );
        assert_eq!((s[1].segment, s[1].values.clone()), (1, vec![3.0]));
        assert_eq!(s[1].dates.as_ref().unwrap()[0].to_string(), "2016-01-04");
        assert_eq!(s[0].features[1], vec![4.0]);
        assert!(s[2].dates.is_none());
    }

    #[test]
    fn rejects_bad_input() {
        for csv in [
            "id,date,value\na,,1\n",
            "series_id,date,value\na,,-1\n",
            "series_id,date,value\na,2016-01-02,1\na,2016-01-01,1\n",
            "series_id,date,value\na,01/02/2016,1\n",
            "series_id,date,value\na,2016-01-01,1\na,,1\n",
        ] {
            assert!(
                matches!(read_series_csv(csv.as_bytes()), Err(Error::Data(_))),
                "{csv}"
            );
        }
    }

    #[test]
    fn write_read_round_trip() {
        let mut a = Series::from_values("a", vec![1.0, 0.1 + 0.2]);
        a.features = vec![vec![1.5], vec![2.5]];
        let mut b = a.clone();
        b.segment = 1;
        b.values = vec![4.0];
        b.features = vec![vec![0.0]];
        let mut out = Vec::new();
        write_series_csv(&mut out, &[a.clone(), b.clone()], &["x".into()]).unwrap();
        let back = read_series_csv(out.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }
}
