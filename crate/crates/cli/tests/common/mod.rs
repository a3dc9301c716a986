#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub fn nmjd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmjd"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("the binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = nmjd(dir, args);
    assert!(
        out.status.success(),
        "nmjd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A network for 8 past values and 3 future values.
pub const SMALL_CONFIG: &str = r#"{
  "input_width": 8,
  "hidden_sizes": [8],
  "horizon": 3,
  "activation": "tanh",
  "omega": 1.0,
  "kappa": 5,
  "learning_rate": 0.01,
  "batch_size": 16,
  "max_epochs": 3,
  "seed": 1
}
"#;

pub const WINDOWING: [&str; 6] = ["--t-past", "8", "--t-future", "3", "--norm", "window_past"];

/// Generates 20 short synthetic paths and a small config in `dir`.
pub fn small_dataset(dir: &Path) {
    ok(
        dir,
        &[
            "generate", "--paths", "20", "--steps", "30", "--seed", "3", "--out", "gen",
        ],
    );
    fs::write(dir.join("config.json"), SMALL_CONFIG).unwrap();
}

pub fn train_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "train",
        "--data",
        "gen/series.csv",
        "--config",
        "config.json",
        "--out",
        out,
    ];
    args.extend(WINDOWING);
    args.extend(extra);
    args
}
