//! Euler–Maruyama simulation of a piecewise MJD in log space, with and
//! without restarts at the unit-interval boundaries.
//!
//! Fine step `i` (1-based) covers `[t_{i-1}, t_i)` with `t_i = i / M` and uses
//! the parameters of interval `step_index(t_{i-1})`. Each step consumes its
//! random draws in the fixed order `z₁`, jump count, `z₂`.
//!
//! In restart mode the first fine step of every unit interval starts from the
//! closed-form anchor instead of the running state. The stored value at the
//! integer time itself is the simulated one; the anchor only seeds the next
//! interval.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::sde::{MjdParams, ParamSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Vanilla,
    Restart,
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Self::Vanilla),
            "restart" => Ok(Self::Restart),
            other => Err(Error::invalid(format!("unknown solver `{other}`"))),
        }
    }
}

/// Log-state used when restarting at integer time `τ - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartAnchor {
    /// `ln E[S_{τ-1}]`, the log of the closed-form conditional mean.
    #[default]
    LogOfMean,
    /// `E[ln S_{τ-1}]`, the exact mean log-price (smaller by the Jensen gap).
    MeanOfLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fine steps per unit interval, `M`.
    pub steps_per_unit: usize,
    pub mode: SolverMode,
    pub seed: u64,
    #[serde(default)]
    pub anchor: RestartAnchor,
}

impl SolverConfig {
    pub fn new(steps_per_unit: usize, mode: SolverMode, seed: u64) -> Self {
        Self {
            steps_per_unit,
            mode,
            seed,
            anchor: RestartAnchor::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps_per_unit == 0 {
            return Err(Error::invalid("steps_per_unit must be >= 1"));
        }
        Ok(())
    }
}

/// Identifies the random stream a path was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    /// `t_i = i / M` for `i = 0..=M T_f`.
    pub times: Vec<f64>,
    pub log_values: Vec<f64>,
    /// Jump count of fine step `i`, stored at index `i` (index 0 is always 0).
    pub jump_counts: Vec<u64>,
    pub seed: SeedRecord,
}

impl SimPath {
    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|v| v.exp()).collect()
    }

    pub fn steps_per_unit(&self) -> usize {
        // times[1] = 1/M exactly when M is a power of two; round otherwise
        (1.0 / self.times[1]).round() as usize
    }

    /// Values at the integer times `1..=T_f`.
    pub fn integer_values(&self) -> Vec<f64> {
        let m = self.steps_per_unit();
        self.log_values
            .iter()
            .skip(m)
            .step_by(m)
            .map(|v| v.exp())
            .collect()
    }
}

/// One compound-Poisson log-jump increment over `dt`: `κ ν + √κ γ z` with
/// `κ ~ Pois(λ dt)`.
pub fn sample_jump_increment(params: &MjdParams, dt: f64, rng: &mut StreamRng) -> f64 {
    jump_increment(params, dt, rng).0
}

fn jump_increment(params: &MjdParams, dt: f64, rng: &mut StreamRng) -> (f64, u64) {
    let count = rng.poisson(params.lambda() * dt);
    let z2 = rng.normal();
    let kf = count as f64;
    (kf * params.nu() + kf.sqrt() * params.gamma() * z2, count)
}

fn anchor_log(schedule: &ParamSchedule, ln_s0: f64, t: f64, anchor: RestartAnchor) -> Result<f64> {
    Ok(match anchor {
        RestartAnchor::LogOfMean => ln_s0 + schedule.cumulative_drift(t)?,
        RestartAnchor::MeanOfLog => ln_s0 + schedule.log_return_moments(t)?.mean,
    })
}

/// Walks one path, reporting `(i, ln S̄_{t_i}, jump count of step i)` for
/// `i = 1..=M T_f`.
fn walk(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
    stream: u64,
    mut visit: impl FnMut(usize, f64, u64),
) -> Result<()> {
    config.validate()?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::invalid(format!("s0 must be positive, got {s0}")));
    }
    let m = config.steps_per_unit;
    let dt = 1.0 / m as f64;
    let sqrt_dt = dt.sqrt();
    let ln_s0 = s0.ln();
    let anchors = match config.mode {
        SolverMode::Vanilla => Vec::new(),
        SolverMode::Restart => (0..schedule.horizon())
            .map(|j| anchor_log(schedule, ln_s0, j as f64, config.anchor))
            .collect::<Result<_>>()?,
    };
    let mut rng = StreamRng::new(config.seed, stream);
    let mut state = ln_s0;
    for i in 1..=m * schedule.horizon() {
        let interval = (i - 1) / m;
        let p = schedule.step(interval + 1);
        let alpha = p.log_drift() * dt;
        let beta = p.sigma() * sqrt_dt * rng.normal();
        let (zeta, count) = jump_increment(p, dt, &mut rng);
        if config.mode == SolverMode::Restart && (i - 1) % m == 0 {
            state = anchors[interval];
        }
        state += alpha + beta + zeta;
        visit(i, state, count);
    }
    Ok(())
}

/// Simulates path `stream` of the configured seed.
pub fn simulate(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
    stream: u64,
) -> Result<SimPath> {
    let n = config.steps_per_unit.max(1) * schedule.horizon();
    let mut log_values = Vec::with_capacity(n + 1);
    let mut jump_counts = Vec::with_capacity(n + 1);
    log_values.push(s0.ln());
    jump_counts.push(0);
    walk(schedule, s0, config, stream, |_, v, c| {
        log_values.push(v);
        jump_counts.push(c);
    })?;
    let m = config.steps_per_unit as f64;
    if let Some(bad) = log_values.iter().find(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("non-finite log-state {bad}")));
    }
    Ok(SimPath {
        times: (0..=n).map(|i| i as f64 / m).collect(),
        log_values,
        jump_counts,
        seed: SeedRecord {
            master: config.seed,
            stream,
        },
    })
}

/// Plain Euler–Maruyama path (stream 0 of the configured seed).
pub fn simulate_vanilla(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
) -> Result<SimPath> {
    let cfg = SolverConfig {
        mode: SolverMode::Vanilla,
        ..*config
    };
    simulate(schedule, s0, &cfg, 0)
}

/// Euler–Maruyama with restart (stream 0 of the configured seed).
pub fn simulate_restart(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
) -> Result<SimPath> {
    let cfg = SolverConfig {
        mode: SolverMode::Restart,
        ..*config
    };
    simulate(schedule, s0, &cfg, 0)
}

/// `n_paths` full paths on streams `0..n_paths`, simulated in parallel.
pub fn simulate_paths(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
    n_paths: usize,
) -> Result<Vec<SimPath>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate(schedule, s0, config, i))
        .collect()
}

/// `ln S̄` at the integer times `1..=T_f` for streams `0..n_paths`, without
/// keeping the fine grid. Row `p` belongs to stream `p`.
pub fn sample_integer_log_values(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
    n_paths: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = config.steps_per_unit;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| {
            let mut out = Vec::with_capacity(schedule.horizon());
            walk(schedule, s0, config, stream, |i, v, _| {
                if i % m == 0 {
                    out.push(v);
                }
            })?;
            Ok(out)
        })
        .collect()
}

/// Test function `g` of a weak-error measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Identity,
    Log,
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log" => Ok(Self::Log),
            other => Err(Error::invalid(format!(
                "unsupported observable `{other}` (expected identity or log)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorRow {
    pub tau: usize,
    pub mc_mean: f64,
    pub exact: f64,
    /// `|mc_mean - exact|`.
    pub error: f64,
    /// Monte-Carlo standard error of `mc_mean`.
    pub std_error: f64,
}

/// `|E_MC[g(S̄_τ)] - E[g(S_τ)]|` at every integer time, against the
/// closed-form expectation.
pub fn empirical_weak_error(
    schedule: &ParamSchedule,
    s0: f64,
    config: &SolverConfig,
    n_paths: usize,
    g: Observable,
) -> Result<Vec<WeakErrorRow>> {
    if n_paths < 2 {
        return Err(Error::invalid("weak error needs at least two paths"));
    }
    let samples = sample_integer_log_values(schedule, s0, config, n_paths)?;
    let n = n_paths as f64;
    (1..=schedule.horizon())
        .map(|tau| {
            let t = tau as f64;
            let exact = match g {
                Observable::Identity => schedule.conditional_mean(s0, t)?,
                Observable::Log => s0.ln() + schedule.log_return_moments(t)?.mean,
            };
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for row in &samples {
                let v = match g {
                    Observable::Identity => row[tau - 1].exp(),
                    Observable::Log => row[tau - 1],
                };
                sum += v;
                sum_sq += v * v;
            }
            let mc_mean = sum / n;
            let var = ((sum_sq - n * mc_mean * mc_mean) / (n - 1.0)).max(0.0);
            Ok(WeakErrorRow {
                tau,
                mc_mean,
                exact,
                error: (mc_mean - exact).abs(),
                std_error: (var / n).sqrt(),
            })
        })
        .collect()
}

/// Long-format CSV: `path_id,time,value,jump_count`.
pub fn write_paths_csv<W: Write>(writer: W, paths: &[SimPath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["path_id", "time", "value", "jump_count"])?;
    for (id, path) in paths.iter().enumerate() {
        for ((t, v), c) in path
            .times
            .iter()
            .zip(&path.log_values)
            .zip(&path.jump_counts)
        {
            w.write_record([
                id.to_string(),
                t.to_string(),
                v.exp().to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
