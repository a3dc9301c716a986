//! Parameter types and closed-form quantities of the (piecewise) Merton jump
//! diffusion.
//!
//! A schedule holds one [`MjdParams`] per unit interval. Interval `τ` (1-based)
//! covers `[τ-1, τ)`; a continuous time `t` maps to its interval through
//! [`step_index`], so integer times belong to the *following* interval. Every
//! module resolves times through that single function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain five-field record, the on-disk form of [`MjdParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub nu: f64,
    pub gamma: f64,
}

/// Coefficients of one unit interval: drift `mu`, diffusion volatility
/// `sigma`, jump intensity `lambda`, and the log-jump law `N(nu, gamma²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamRecord", into = "ParamRecord")]
pub struct MjdParams {
    mu: f64,
    sigma: f64,
    lambda: f64,
    nu: f64,
    gamma: f64,
}

impl MjdParams {
    /// Validated constructor: all fields finite, `sigma > 0`, `gamma > 0`,
    /// `lambda >= 0`.
    pub fn new(mu: f64, sigma: f64, lambda: f64, nu: f64, gamma: f64) -> Result<Self> {
        let p = Self::degenerate(mu, sigma, lambda, nu, gamma)?;
        if sigma <= 0.0 {
            return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
        }
        if gamma <= 0.0 {
            return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(p)
    }

    /// Like [`MjdParams::new`] but admits `sigma = 0` and `gamma = 0`.
    ///
    /// Such parameters can be simulated (a drift-only path, say) but have no
    /// density; the likelihood functions reject them.
    pub fn degenerate(mu: f64, sigma: f64, lambda: f64, nu: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [
            ("mu", mu),
            ("sigma", sigma),
            ("lambda", lambda),
            ("nu", nu),
            ("gamma", gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if sigma < 0.0 || gamma < 0.0 || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "sigma, gamma, lambda must be non-negative (got {sigma}, {gamma}, {lambda})"
            )));
        }
        Ok(Self {
            mu,
            sigma,
            lambda,
            nu,
            gamma,
        })
    }

    /// Jump-free (geometric Brownian motion) parameters. The jump-size law is
    /// irrelevant when `lambda = 0`; it is set to `N(0, 1)`.
    pub fn black_scholes(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, 0.0, 0.0, 1.0)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Jump compensation `k = E[Y - 1]`.
    pub fn k(&self) -> f64 {
        (self.nu + 0.5 * self.gamma * self.gamma).exp_m1()
    }

    /// Drift of the log-price per unit time, excluding the jump sum:
    /// `mu - lambda k - sigma²/2`.
    pub fn log_drift(&self) -> f64 {
        self.mu - self.lambda * self.k() - 0.5 * self.sigma * self.sigma
    }

    /// First cumulant rate of the log-return per unit time.
    pub fn log_mean_rate(&self) -> f64 {
        self.log_drift() + self.lambda * self.nu
    }

    /// Second cumulant rate of the log-return per unit time.
    pub fn log_variance_rate(&self) -> f64 {
        self.sigma * self.sigma + self.lambda * (self.gamma * self.gamma + self.nu * self.nu)
    }

    pub fn record(&self) -> ParamRecord {
        ParamRecord::from(*self)
    }
}

impl TryFrom<ParamRecord> for MjdParams {
    type Error = Error;

    fn try_from(r: ParamRecord) -> Result<Self> {
        MjdParams::new(r.mu, r.sigma, r.lambda, r.nu, r.gamma)
    }
}

impl From<MjdParams> for ParamRecord {
    fn from(p: MjdParams) -> Self {
        ParamRecord {
            mu: p.mu,
            sigma: p.sigma,
            lambda: p.lambda,
            nu: p.nu,
            gamma: p.gamma,
        }
    }
}

/// `k = exp(nu + gamma²/2) - 1`, the expected relative jump size.
pub fn expected_jump_ratio(nu: f64, gamma: f64) -> Result<f64> {
    if !nu.is_finite() || !gamma.is_finite() {
        return Err(Error::invalid("nu and gamma must be finite"));
    }
    if gamma < 0.0 {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    Ok((nu + 0.5 * gamma * gamma).exp_m1())
}

/// Interval index `⌊t⌋ + 1` of time `t` within a horizon of `horizon` unit
/// steps. Integer times map to the interval that starts there.
pub fn step_index(t: f64, horizon: usize) -> Result<usize> {
    if !(t >= 0.0 && t < horizon as f64) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            lo: 0.0,
            hi: horizon as f64,
        });
    }
    Ok(t.floor() as usize + 1)
}

/// Piecewise-constant coefficient sequence over `τ = 1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<MjdParams>", into = "Vec<MjdParams>")]
pub struct ParamSchedule {
    steps: Vec<MjdParams>,
}

impl TryFrom<Vec<MjdParams>> for ParamSchedule {
    type Error = Error;

    fn try_from(steps: Vec<MjdParams>) -> Result<Self> {
        ParamSchedule::new(steps)
    }
}

impl From<ParamSchedule> for Vec<MjdParams> {
    fn from(s: ParamSchedule) -> Self {
        s.steps
    }
}

/// Mean and variance of `ln(S_t / S_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: f64,
    pub variance: f64,
}

impl ParamSchedule {
    pub fn new(steps: Vec<MjdParams>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        Ok(Self { steps })
    }

    /// The same parameters repeated over `horizon` steps.
    pub fn constant(params: MjdParams, horizon: usize) -> Result<Self> {
        Self::new(vec![params; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self) -> &[MjdParams] {
        &self.steps
    }

    /// Parameters of interval `tau` (1-based).
    pub fn step(&self, tau: usize) -> &MjdParams {
        &self.steps[tau - 1]
    }

    /// Parameters in force at time `t`.
    pub fn at(&self, t: f64) -> Result<&MjdParams> {
        Ok(self.step(step_index(t, self.horizon())?))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let h = self.horizon() as f64;
        if !(0.0..=h).contains(&t) {
            return Err(Error::OutOfRange {
                what: "t",
                value: t,
                lo: 0.0,
                hi: h,
            });
        }
        Ok(())
    }

    /// `∫₀ᵗ f(params_s) ds` for a rate `f` that is constant on each interval.
    fn integrate(&self, t: f64, f: impl Fn(&MjdParams) -> f64) -> Result<f64> {
        self.check_time(t)?;
        let whole = (t.floor() as usize).min(self.horizon());
        let mut acc = 0.0;
        for p in &self.steps[..whole] {
            acc += f(p);
        }
        let frac = t - whole as f64;
        if frac > 0.0 {
            acc += frac * f(&self.steps[whole]);
        }
        Ok(acc)
    }

    /// Cumulative drift `∫₀ᵗ mu_s ds`.
    pub fn cumulative_drift(&self, t: f64) -> Result<f64> {
        self.integrate(t, |p| p.mu)
    }

    /// `E[S_t | S_0 = s0] = s0 exp(∫₀ᵗ mu_s ds)`.
    pub fn conditional_mean(&self, s0: f64, t: f64) -> Result<f64> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid(format!("s0 must be positive, got {s0}")));
        }
        Ok(s0 * self.cumulative_drift(t)?.exp())
    }

    /// Exact mean and variance of `ln(S_t / S_0)`.
    pub fn log_return_moments(&self, t: f64) -> Result<MomentPair> {
        Ok(MomentPair {
            mean: self.integrate(t, MjdParams::log_mean_rate)?,
            variance: self.integrate(t, MjdParams::log_variance_rate)?,
        })
    }
}

/// `E[S_t | s0]` for a schedule; free-function form of
/// [`ParamSchedule::conditional_mean`].
pub fn conditional_mean(schedule: &ParamSchedule, s0: f64, t: f64) -> Result<f64> {
    schedule.conditional_mean(s0, t)
}

pub fn log_return_moments(schedule: &ParamSchedule, t: f64) -> Result<MomentPair> {
    schedule.log_return_moments(t)
}

/// First four cumulants of `ln(S_t / S_0)` under stationary parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

pub fn stationary_cumulants(params: &MjdParams, t: f64) -> Result<Cumulants> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    let (l, nu, g2) = (params.lambda, params.nu, params.gamma * params.gamma);
    Ok(Cumulants {
        k1: params.log_mean_rate() * t,
        k2: params.log_variance_rate() * t,
        k3: l * (3.0 * g2 * nu + nu.powi(3)) * t,
        k4: l * (3.0 * g2 * g2 + 6.0 * nu * nu * g2 + nu.powi(4)) * t,
    })
}
