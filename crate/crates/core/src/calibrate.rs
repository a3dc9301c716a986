//! Stationary Black–Scholes and Merton baselines fitted by maximum likelihood
//! on a window of past values at unit spacing.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{sample_forecast, ForecastBundle};
use crate::likelihood::MixtureKernel;
use crate::neural::{MU_BOUND, NU_BOUND};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::rng::StreamRng;
use crate::sde::{MjdParams, ParamSchedule};
use crate::solver::{SolverConfig, SolverMode};

/// Volatility used downstream when the fitted one is (near) zero.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsFit {
    pub mu: f64,
    /// Fitted volatility, floored at [`SIGMA_FLOOR`].
    pub sigma: f64,
    /// The raw volatility estimate fell below the floor.
    pub degenerate: bool,
    pub log_likelihood: f64,
}

impl BsFit {
    pub fn params(&self) -> MjdParams {
        MjdParams::black_scholes(self.mu, self.sigma).expect("floored sigma is valid")
    }
}

fn check_length(len: usize, min_len: usize) -> Result<()> {
    if len < min_len {
        return Err(Error::data(format!(
            "history of {len} values is shorter than the required {min_len}"
        )));
    }
    Ok(())
}

fn log_history(history: &[f64], min_len: usize) -> Result<Vec<f64>> {
    check_length(history.len(), min_len)?;
    if let Some(v) = history.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::data(format!("history value {v} is not positive")));
    }
    Ok(history.iter().map(|v| v.ln()).collect())
}

fn check_log_history(log_history: &[f64], min_len: usize) -> Result<()> {
    check_length(log_history.len(), min_len)?;
    if let Some(v) = log_history.iter().find(|v| !v.is_finite()) {
        return Err(Error::data(format!("log-history value {v} is not finite")));
    }
    Ok(())
}

/// Closed-form Gaussian MLE on log-returns: `σ̂²` is their (1/n) variance and
/// `μ̂ = mean + σ̂²/2`.
pub fn fit_bs(history: &[f64]) -> Result<BsFit> {
    fit_bs_log(&log_history(history, 3)?)
}

/// [`fit_bs`] on log-values, for series whose values leave the `f64` range.
pub fn fit_bs_log(log_history: &[f64]) -> Result<BsFit> {
    check_log_history(log_history, 3)?;
    let r: Vec<f64> = log_history.windows(2).map(|w| w[1] - w[0]).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let raw_sigma = var.sqrt();
    let degenerate = raw_sigma < SIGMA_FLOOR;
    if degenerate {
        warn!("degenerate Black-Scholes fit: log-return variance {var:e}; sigma floored");
    }
    let sigma = raw_sigma.max(SIGMA_FLOOR);
    let mu = mean + 0.5 * var;
    let drift = mu - 0.5 * sigma * sigma;
    let log_likelihood = r
        .iter()
        .map(|x| {
            -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
                - (x - drift).powi(2) / (2.0 * sigma * sigma)
        })
        .sum();
    Ok(BsFit {
        mu,
        sigma,
        degenerate,
        log_likelihood,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of Nelder–Mead starts.
    pub restarts: usize,
    pub nelder_mead: NelderMeadConfig,
    /// Spread of the random starts in the unconstrained coordinates.
    pub start_spread: f64,
    /// Candidates with a larger jump intensity are rejected.
    pub lambda_max: f64,
    /// Candidates with `|μ|` above this are rejected.
    pub mu_max: f64,
    /// Candidates with `|ν|` above this are rejected. Without it a vanishing
    /// `λ` leaves `ν` free to drift, and `μ = drift + λk + σ²/2` with it.
    pub nu_max: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            nelder_mead: NelderMeadConfig::default(),
            start_spread: 0.5,
            lambda_max: 20.0,
            mu_max: MU_BOUND,
            nu_max: NU_BOUND,
            seed: 0,
        }
    }
}

/// Fitted stationary parameters and fit metadata. Serializes as the
/// parameter record plus `log_likelihood`, `iterations`, `converged`, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MjdFit {
    #[serde(flatten)]
    pub params: MjdParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// The optimum sits within 1% of `lambda_max`; a larger truncation order
    /// should be considered.
    pub lambda_at_cap: bool,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Sum of unit-step log-densities of consecutive log-values.
pub fn mjd_log_likelihood(log_values: &[f64], params: &MjdParams, kappa: usize) -> Result<f64> {
    let kernel = MixtureKernel::new(params, 1.0, kappa)?;
    let ll: f64 = log_values
        .windows(2)
        .map(|w| kernel.log_density(w[0], w[1]))
        .sum();
    if !ll.is_finite() {
        return Err(Error::numerical("non-finite log-likelihood"));
    }
    Ok(ll)
}

// unconstrained coordinates: (μ, ln σ, ln λ, ν, ln γ)
fn to_params(x: &[f64]) -> Option<MjdParams> {
    MjdParams::new(x[0], x[1].exp(), x[2].exp(), x[3], x[4].exp()).ok()
}

#[cfg(test)]
fn to_coords(p: &MjdParams) -> Vec<f64> {
    vec![
        p.mu(),
        p.sigma().ln(),
        p.lambda().ln(),
        p.nu(),
        p.gamma().ln(),
    ]
}

/// Multi-start Nelder–Mead maximization of the truncated stationary MJD
/// likelihood.
///
/// Starts: the moment-matched guess (`μ`, `σ` from [`fit_bs`], `λ = 1`,
/// `ν = 0`, `γ = 0.5`), the nearly jump-free point at the Black–Scholes
/// optimum, then random perturbations of the first.
pub fn fit_mjd(history: &[f64], kappa: usize, config: &FitConfig) -> Result<MjdFit> {
    fit_mjd_log(&log_history(history, 8)?, kappa, config)
}

/// [`fit_mjd`] on log-values.
pub fn fit_mjd_log(log_history: &[f64], kappa: usize, config: &FitConfig) -> Result<MjdFit> {
    check_log_history(log_history, 8)?;
    let logs = log_history;
    let bs = fit_bs_log(logs)?;
    let lambda_max = config.lambda_max;
    let feasible = |p: &MjdParams| {
        p.lambda() <= lambda_max && p.mu().abs() <= config.mu_max && p.nu().abs() <= config.nu_max
    };
    let objective = |x: &[f64]| -> f64 {
        match to_params(x) {
            Some(p) if feasible(&p) => {
                mjd_log_likelihood(logs, &p, kappa).map_or(f64::INFINITY, |ll| -ll)
            }
            _ => f64::INFINITY,
        }
    };

    let mu0 = bs.mu.clamp(-0.9 * config.mu_max, 0.9 * config.mu_max);
    let guess = vec![mu0, bs.sigma.ln(), 0.0, 0.0, 0.5f64.ln()];
    let nested = vec![mu0, bs.sigma.ln(), 1e-3f64.ln(), 0.0, 0.5f64.ln()];
    let mut rng = StreamRng::new(config.seed, 0);
    let mut starts = vec![guess.clone(), nested];
    while starts.len() < config.restarts.max(1) {
        let mut x: Vec<f64> = guess
            .iter()
            .map(|g| g + config.start_spread * rng.normal())
            .collect();
        x[0] = x[0].clamp(-0.9 * config.mu_max, 0.9 * config.mu_max);
        x[2] = x[2].min((0.9 * lambda_max).ln());
        x[3] = x[3].clamp(-0.9 * config.nu_max, 0.9 * config.nu_max);
        starts.push(x);
    }
    starts.truncate(config.restarts.max(1));

    let mut best: Option<crate::optim::Minimum> = None;
    let (mut iterations, mut evaluations) = (0, 0);
    for start in &starts {
        let m = nelder_mead(objective, start, &config.nelder_mead);
        iterations += m.iterations;
        evaluations += m.evals;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    let params = to_params(&best.x)
        .filter(|_| best.value.is_finite())
        .ok_or_else(|| Error::numerical("no feasible starting point for the MJD fit"))?;
    if !best.converged {
        warn!(
            "MJD fit did not converge within {} evaluations; returning best iterate",
            config.nelder_mead.max_evals
        );
    }
    let lambda_at_cap = params.lambda() > 0.99 * lambda_max;
    if lambda_at_cap {
        warn!(
            "fitted jump intensity {:.3} is at the cap {lambda_max}; kappa = {kappa} may truncate too much mass",
            params.lambda()
        );
    }
    Ok(MjdFit {
        params,
        log_likelihood: -best.value,
        iterations,
        evaluations,
        converged: best.converged,
        lambda_at_cap,
        trace: best.trace.iter().map(|v| -v).collect(),
    })
}

/// `k` restart-solver trajectories from stationary `params` over `horizon`
/// unit steps, with the `s0 e^{μ t}` mean trajectory.
pub fn forecast_stationary(
    params: &MjdParams,
    s0: f64,
    horizon: usize,
    k: usize,
    steps_per_unit: usize,
    kappa: usize,
    seed: u64,
) -> Result<ForecastBundle> {
    if horizon == 0 || k == 0 {
        return Err(Error::invalid("horizon and k must be >= 1"));
    }
    let schedule = ParamSchedule::constant(*params, horizon)?;
    let solver = SolverConfig::new(steps_per_unit, SolverMode::Restart, seed);
    sample_forecast(&schedule, s0, k, &solver, 0, kappa)
}
