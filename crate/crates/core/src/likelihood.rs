//! Truncated closed-form likelihood of log-prices under a piecewise MJD.
//!
//! Over an interval of length `δ` with constant parameters, `ln S_{t+δ}` given
//! `ln S_t` is a Poisson mixture of Gaussians:
//!
//! ```text
//! p(y | x) = Σ_n  e^{-λδ} (λδ)^n / n!  φ(y; a_n, b_n²)
//! a_n = x + (μ - λk - σ²/2) δ + n ν,     b_n² = σ² δ + γ² n
//! ```
//!
//! The series is cut at `n = κ` and evaluated with log-sum-exp.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::sde::{MjdParams, ParamSchedule};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Maximum jump count retained per interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub kappa: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { kappa: 5 }
    }
}

/// Partial derivatives of a one-step log-density.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DensityGrad {
    pub ln_prev: f64,
    pub ln_next: f64,
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub nu: f64,
    pub gamma: f64,
}

fn check_inputs(params: &MjdParams, ln_prev: f64, ln_next: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    if !ln_prev.is_finite() || !ln_next.is_finite() {
        return Err(Error::invalid(format!(
            "log-values must be finite (got {ln_prev}, {ln_next})"
        )));
    }
    if params.sigma() <= 0.0 {
        return Err(Error::invalid("likelihood requires sigma > 0"));
    }
    if params.lambda() > 0.0 && params.gamma() <= 0.0 {
        return Err(Error::invalid(
            "likelihood requires gamma > 0 when lambda > 0",
        ));
    }
    Ok(())
}

/// Number of mixture terms actually summed: `κ + 1`, or one when `λ = 0`.
fn n_terms(params: &MjdParams, kappa: usize) -> usize {
    if params.lambda() == 0.0 {
        1
    } else {
        kappa + 1
    }
}

/// Log of the Poisson weight `P(ΔN = n)` for mean `m`, with `0 ln 0 = 0`.
fn log_poisson_weight(n: usize, m: f64) -> f64 {
    if n == 0 {
        -m
    } else {
        -m + n as f64 * m.ln() - ln_gamma(n as f64 + 1.0)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Per-term constants of the truncated mixture for fixed parameters and `δ`,
/// so repeated evaluations (calibration sweeps) skip the set-up work.
#[derive(Debug, Clone)]
pub struct MixtureKernel {
    drift: f64,
    // (log weight - ½ ln 2πv, 1/(2v), n ν)
    terms: Vec<(f64, f64, f64)>,
}

impl MixtureKernel {
    pub fn new(params: &MjdParams, delta: f64, kappa: usize) -> Result<Self> {
        check_inputs(params, 0.0, 0.0, delta)?;
        let m = params.lambda() * delta;
        let s2d = params.sigma() * params.sigma() * delta;
        let g2 = params.gamma() * params.gamma();
        let terms = (0..n_terms(params, kappa))
            .map(|n| {
                let nf = n as f64;
                let v = s2d + g2 * nf;
                (
                    log_poisson_weight(n, m) - 0.5 * (LN_2PI + v.ln()),
                    0.5 / v,
                    nf * params.nu(),
                )
            })
            .collect();
        Ok(Self {
            drift: params.log_drift() * delta,
            terms,
        })
    }

    /// Single-pass log-sum-exp over the retained terms.
    pub fn log_density(&self, ln_prev: f64, ln_next: f64) -> f64 {
        let base = ln_next - ln_prev - self.drift;
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for &(c, inv2v, shift) in &self.terms {
            let r = base - shift;
            let t = c - r * r * inv2v;
            if t <= max {
                acc += (t - max).exp();
            } else {
                acc = acc * (max - t).exp() + 1.0;
                max = t;
            }
        }
        max + acc.ln()
    }
}

/// `ln p(ln_next | ln_prev)` truncated at `kappa` jumps.
pub fn one_step_log_density(
    params: &MjdParams,
    ln_prev: f64,
    ln_next: f64,
    delta: f64,
    kappa: usize,
) -> Result<f64> {
    check_inputs(params, ln_prev, ln_next, delta)?;
    let out = MixtureKernel::new(params, delta, kappa)?.log_density(ln_prev, ln_next);
    if !out.is_finite() {
        return Err(Error::numerical(format!(
            "non-finite log-density {out} at ln_prev={ln_prev}, ln_next={ln_next}"
        )));
    }
    Ok(out)
}

/// Value and exact gradient of [`one_step_log_density`].
///
/// The `lambda` partial assumes `lambda > 0`; at `lambda = 0` only the
/// jump-free term is summed and the reported `lambda` partial is the one-sided
/// derivative of the truncated series.
pub fn one_step_log_density_grad(
    params: &MjdParams,
    ln_prev: f64,
    ln_next: f64,
    delta: f64,
    kappa: usize,
) -> Result<(f64, DensityGrad)> {
    check_inputs(params, ln_prev, ln_next, delta)?;
    let (sigma, lambda, nu, gamma) = (params.sigma(), params.lambda(), params.nu(), params.gamma());
    let k = params.k();
    let m = lambda * delta;
    let drift = ln_prev + params.log_drift() * delta;
    let s2d = sigma * sigma * delta;
    let g2 = gamma * gamma;
    let terms_n = n_terms(params, kappa);

    let mut logs = Vec::with_capacity(terms_n);
    // (∂t/∂a, ∂t/∂v) per term
    let mut partials = Vec::with_capacity(terms_n);
    for n in 0..terms_n {
        let nf = n as f64;
        let v = s2d + g2 * nf;
        let r = ln_next - (drift + nf * nu);
        logs.push(log_poisson_weight(n, m) - 0.5 * (LN_2PI + v.ln()) - r * r / (2.0 * v));
        partials.push((r / v, -0.5 / v + r * r / (2.0 * v * v)));
    }
    let value = log_sum_exp(&logs);
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "non-finite log-density {value} at ln_prev={ln_prev}, ln_next={ln_next}"
        )));
    }

    let mut g = DensityGrad::default();
    let one_plus_k = 1.0 + k;
    for (n, (lt, (dt_da, dt_dv))) in logs.iter().zip(partials).enumerate() {
        let w = (lt - value).exp();
        let nf = n as f64;
        g.ln_prev += w * dt_da;
        g.ln_next -= w * dt_da;
        g.mu += w * dt_da * delta;
        g.sigma += w * (dt_da * (-sigma * delta) + dt_dv * 2.0 * sigma * delta);
        let dlw_dl = if n == 0 { -delta } else { -delta + nf / lambda };
        g.lambda += w * (dlw_dl + dt_da * (-k * delta));
        g.nu += w * dt_da * (nf - lambda * delta * one_plus_k);
        g.gamma += w * (dt_da * (-lambda * delta * one_plus_k * gamma) + dt_dv * 2.0 * gamma * nf);
    }
    if lambda == 0.0 && kappa > 0 {
        // one-sided derivative of the one-jump weight at λ = 0: δ φ₁/φ₀
        let v1 = s2d + g2;
        let r1 = ln_next - (drift + nu);
        let log_phi1 = -0.5 * (LN_2PI + v1.ln()) - r1 * r1 / (2.0 * v1);
        g.lambda += delta * (log_phi1 - value).exp();
    }
    Ok((value, g))
}

/// How conditioning values are chosen across a multi-step horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Condition step `τ` on the observed `S_{τ-1}`.
    TeacherForced,
    /// Condition step `τ` on the closed-form mean `E[S_{τ-1}]`.
    MeanBootstrapped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonLikelihood {
    pub total: f64,
    pub per_step: Vec<f64>,
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::data(format!("{what}[{i}] = {v} is not positive")));
    }
    Ok(())
}

/// Joint log-likelihood of `targets` (values at `τ = 1..=T_f`) given `s0`,
/// one unit step per target.
pub fn horizon_log_likelihood(
    schedule: &ParamSchedule,
    s0: f64,
    targets: &[f64],
    kappa: usize,
    anchor: Anchor,
) -> Result<HorizonLikelihood> {
    check_positive(&[s0], "s0")?;
    check_positive(targets, "targets")?;
    if targets.len() != schedule.horizon() {
        return Err(Error::Shape(format!(
            "{} targets for a horizon of {}",
            targets.len(),
            schedule.horizon()
        )));
    }
    let ln_s0 = s0.ln();
    let per_step = (1..=schedule.horizon())
        .map(|tau| {
            let ln_prev = match anchor {
                Anchor::TeacherForced if tau > 1 => targets[tau - 2].ln(),
                Anchor::TeacherForced => ln_s0,
                Anchor::MeanBootstrapped => ln_s0 + schedule.cumulative_drift((tau - 1) as f64)?,
            };
            one_step_log_density(
                schedule.step(tau),
                ln_prev,
                targets[tau - 1].ln(),
                1.0,
                kappa,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HorizonLikelihood {
        total: per_step.iter().sum(),
        per_step,
    })
}

/// Which estimate produced a [`TruncationBound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundBranch {
    /// `κ > λδ`: Poisson-CDF normal bound followed by the Mills-ratio bound.
    Asymptotic,
    /// Poisson tail mass times the Gaussian density cap `1/√(2π b²_{κ+1})`.
    PreAsymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    pub value: f64,
    /// Natural log of `value`, kept separately so tiny bounds stay comparable.
    pub log_value: f64,
    pub branch: BoundBranch,
}

/// Upper bound on the density mass dropped by truncating at `kappa` jumps,
/// valid uniformly over the evaluation point.
pub fn truncation_error_bound(
    params: &MjdParams,
    delta: f64,
    kappa: usize,
) -> Result<TruncationBound> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be > 0, got {delta}")));
    }
    let m = params.lambda() * delta;
    let b2 = params.sigma().powi(2) * delta + params.gamma().powi(2) * (kappa as f64 + 1.0);
    if m == 0.0 {
        return Ok(TruncationBound {
            value: 0.0,
            log_value: f64::NEG_INFINITY,
            branch: BoundBranch::PreAsymptotic,
        });
    }
    if b2 <= 0.0 {
        return Err(Error::invalid(
            "truncation bound needs sigma > 0 or gamma > 0",
        ));
    }
    let kf = kappa as f64;
    if kappa >= 1 && kf > m && params.gamma() > 0.0 {
        // Kullback-Leibler divergence of Pois(m) from Pois(κ)
        let h = m - kf + kf * (kf / m).ln();
        let log_value = -h - LN_2PI - 0.5 * (2.0 * b2 * h).ln();
        return Ok(TruncationBound {
            value: log_value.exp(),
            log_value,
            branch: BoundBranch::Asymptotic,
        });
    }
    let tail = gamma_lr(kf + 1.0, m);
    let log_value = tail.ln() - 0.5 * (LN_2PI + b2.ln());
    Ok(TruncationBound {
        value: log_value.exp(),
        log_value,
        branch: BoundBranch::PreAsymptotic,
    })
}
