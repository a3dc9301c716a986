use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ingest::Series;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::sde::{MjdParams, ParamSchedule};
use crate::solver::{simulate, SolverConfig, SolverMode};

/// Solver streams start here so they never collide with parameter streams.
const SOLVER_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            n_steps: 100,
            seed: 0,
        }
    }
}

/// The generating parameters of every path, written next to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParamLog {
    pub spec: SyntheticSpec,
    /// Parameters of path `i`, whose series id is `path{i}`.
    pub params: Vec<MjdParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    /// `n_steps + 1` values per path on the grid `i / n_steps`, starting at 1.
    pub series: Vec<Series>,
    pub log: SyntheticParamLog,
    /// Total jump count per path.
    pub jump_counts: Vec<u64>,
}

/// Parameters drawn uniformly from `μ ∈ [0.1, 0.5)`, `σ ∈ [0.1, 0.5)`,
/// `λ ∈ [3, 10)`, `ν ∈ [−0.1, 0.1)`, `γ ∈ [0.5, 1)`.
pub fn draw_synthetic_params(rng: &mut StreamRng) -> MjdParams {
    let mu = rng.uniform_range(0.1, 0.5);
    let sigma = rng.uniform_range(0.1, 0.5);
    let lambda = rng.uniform_range(3.0, 10.0);
    let nu = rng.uniform_range(-0.1, 0.1);
    let gamma = rng.uniform_range(0.5, 1.0);
    MjdParams::new(mu, sigma, lambda, nu, gamma).expect("ranges satisfy the invariants")
}

/// Simulates `n_paths` stationary paths over unit time with plain
/// Euler–Maruyama at `n_steps` steps, each from its own parameter draw.
pub fn generate_synthetic(n_paths: usize, n_steps: usize, seed: u64) -> Result<SyntheticSet> {
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::invalid("n_paths and n_steps must be at least 1"));
    }
    let config = SolverConfig::new(n_steps, SolverMode::Vanilla, seed);
    let drawn: Vec<(MjdParams, Series, u64)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let params = draw_synthetic_params(&mut StreamRng::new(seed, i as u64));
            let schedule = ParamSchedule::constant(params, 1)?;
            let path = simulate(&schedule, 1.0, &config, SOLVER_STREAM_BASE + i as u64)?;
            let jumps = path.jump_counts.iter().sum();
            Ok((
                params,
                Series::from_values(format!("path{i}"), path.values()),
                jumps,
            ))
        })
        .collect::<Result<_>>()?;
    let mut series = Vec::with_capacity(n_paths);
    let mut params = Vec::with_capacity(n_paths);
    let mut jump_counts = Vec::with_capacity(n_paths);
    for (p, s, j) in drawn {
        params.push(p);
        series.push(s);
        jump_counts.push(j);
    }
    Ok(SyntheticSet {
        series,
        log: SyntheticParamLog {
            spec: SyntheticSpec {
                n_paths,
                n_steps,
                seed,
            },
            params,
        },
        jump_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sha256_hex;
    use crate::data::write_series_csv;

    fn hash(set: &SyntheticSet) -> String {
        let mut out = Vec::new();
        write_series_csv(&mut out, &set.series, &[]).unwrap();
        sha256_hex(&out)
    }

    #[test]
    fn shape_and_ranges() {
        let set = generate_synthetic(50, 100, 1).unwrap();
        assert_eq!(set.series.len(), 50);
        assert!(set
            .series
            .iter()
            .all(|s| s.len() == 101 && s.values[0] == 1.0));
        for p in &set.log.params {
            assert!((0.1..0.5).contains(&p.mu()) && (3.0..10.0).contains(&p.lambda()));
            assert!((-0.1..0.1).contains(&p.nu()) && (0.5..1.0).contains(&p.gamma()));
        }
        assert_eq!(SyntheticSpec::default().n_paths, 10_000);
        assert!(generate_synthetic(0, 10, 1).is_err());
    }

    #[test]
    fn fixed_seed_fixed_hash() {
        assert_eq!(
            hash(&generate_synthetic(20, 30, 7).unwrap()),
            hash(&generate_synthetic(20, 30, 7).unwrap())
        );
        assert_ne!(
            hash(&generate_synthetic(20, 30, 7).unwrap()),
            hash(&generate_synthetic(20, 30, 8).unwrap())
        );
    }

    #[test]
    fn jump_frequency_matches_mean_intensity() {
        let set = generate_synthetic(4000, 100, 3).unwrap();
        let n = set.jump_counts.len() as f64;
        let mean = set.jump_counts.iter().sum::<u64>() as f64 / n;
        // count variance = E[λ] + Var[λ] over the uniform intensity draw
        let se = ((6.5 + 49.0 / 12.0) / n).sqrt();
        assert!((mean - 6.5).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn parameter_log_round_trips_bit_exactly() {
        let set = generate_synthetic(30, 10, 11).unwrap();
        let json = serde_json::to_string(&set.log).unwrap();
        let back: SyntheticParamLog = serde_json::from_str(&json).unwrap();
        for (a, b) in set.log.params.iter().zip(&back.params) {
            assert_eq!(a.record(), b.record());
            assert_eq!(a.sigma().to_bits(), b.sigma().to_bits());
        }
        assert_eq!(back, set.log);
    }
}
