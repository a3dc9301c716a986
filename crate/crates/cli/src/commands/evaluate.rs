use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use nmjd_core::eval::{protocol_metrics, render_table, ProtocolReport};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::forecast_csv::read_forecasts;
use crate::io::{display, file_sha256, record_run, sibling, write_json};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Forecast CSV, optionally labelled as LABEL=PATH. Repeat for more rows.
    #[arg(long = "forecast", required = true)]
    pub forecasts: Vec<String>,
    /// Report JSON; the text table is written next to it as .txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Input {
    label: String,
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct EvaluateRun<'a> {
    inputs: &'a [Input],
    out: String,
    table: String,
}

#[derive(Serialize)]
struct Row<'a> {
    label: &'a str,
    report: &'a ProtocolReport,
}

fn parse_input(raw: &str) -> (String, PathBuf) {
    match raw.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(raw);
            let label = path
                .file_stem()
                .map_or(raw.to_string(), |s| s.to_string_lossy().into_owned());
            (label, path)
        }
    }
}

fn evaluate_file(path: &Path) -> CliResult<ProtocolReport> {
    let file =
        File::open(path).map_err(|e| CliError::data(e.to_string()).context(display(path)))?;
    let records = read_forecasts(file).map_err(|e| e.context(display(path)))?;
    let k = records.first().map_or(0, |r| r.bundle.k());
    if let Some(r) = records.iter().find(|r| r.bundle.k() != k) {
        return Err(CliError::data(format!(
            "{}: window {} has {} samples, expected {k}",
            display(path),
            r.window,
            r.bundle.k()
        )));
    }
    let mut bundles = Vec::with_capacity(records.len());
    let mut truths = Vec::with_capacity(records.len());
    for r in records {
        let truth = r.truth.ok_or_else(|| {
            CliError::data(format!(
                "{}: window {} has no truth row",
                display(path),
                r.window
            ))
        })?;
        bundles.push(r.bundle);
        truths.push(truth);
    }
    if bundles.is_empty() {
        return Err(CliError::data(format!("{} has no windows", display(path))));
    }
    Ok(protocol_metrics(&bundles, &truths, k)?)
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let table_path = sibling(&args.out, "txt");
    let mut inputs = vec![];
    for raw in &args.forecasts {
        let (label, path) = parse_input(raw);
        inputs.push(Input {
            label,
            sha256: file_sha256(&path)?,
            path: display(&path),
        });
    }
    record_run(
        "evaluate",
        &EvaluateRun {
            inputs: &inputs,
            out: display(&args.out),
            table: display(&table_path),
        },
        &sibling(&args.out, "run.json"),
    )?;
    let mut rows = vec![];
    for input in &inputs {
        let report = evaluate_file(Path::new(&input.path))?;
        rows.push((input.label.clone(), report));
    }
    let json: Vec<Row> = rows
        .iter()
        .map(|(label, report)| Row { label, report })
        .collect();
    write_json(&args.out, &json)?;
    let table = render_table(&rows);
    fs::write(&table_path, &table)
        .map_err(|e| CliError::data(e.to_string()).context(display(&table_path)))?;
    info!("\n{table}");
    info!("wrote {} and {}", display(&args.out), display(&table_path));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_default_to_the_file_stem() {
        assert_eq!(
            parse_input("nmjd=out/f.csv"),
            ("nmjd".into(), PathBuf::from("out/f.csv"))
        );
        assert_eq!(
            parse_input("out/base.csv"),
            ("base".into(), PathBuf::from("out/base.csv"))
        );
    }
}
