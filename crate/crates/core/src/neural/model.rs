use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::heads::{map_heads, MappedHeads, HEADS};
use super::mlp::Mlp;
use crate::data::SeriesWindow;
use crate::error::{Error, Result};
use crate::likelihood::{one_step_log_density, one_step_log_density_grad, Anchor};
use crate::rng::StreamRng;
use crate::sde::ParamSchedule;

/// Gain on the initial output-layer weights, so the first schedules stay
/// close to the zero-output map.
const OUTPUT_GAIN: f64 = 0.1;

/// A predictor from a normalized window to a coefficient schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel {
    pub config: NetworkConfig,
    pub net: Mlp,
}

/// One horizon step's loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    pub log_density: f64,
    /// `(S_τ − Ŝ_τ)²`, before weighting by `omega`.
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub per_step: Vec<StepLoss>,
}

struct Prepared {
    input: Vec<f64>,
    s0: f64,
    targets: Vec<f64>,
}

impl NeuralModel {
    /// Random initialization from `config.seed`.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let net = Mlp::new(
            config.input_width,
            &config.hidden_sizes,
            HEADS * config.horizon,
            OUTPUT_GAIN,
            &mut StreamRng::new(config.seed, 0),
        );
        Ok(Self { config, net })
    }

    pub fn from_parts(config: NetworkConfig, net: Mlp) -> Result<Self> {
        config.validate()?;
        let expected = Mlp::layout_for(
            config.input_width,
            &config.hidden_sizes,
            HEADS * config.horizon,
        );
        if net.layout() != expected.as_slice() {
            return Err(Error::Shape(
                "network layout does not match the config".into(),
            ));
        }
        Ok(Self { config, net })
    }

    /// Log of the normalized past followed by the context.
    pub fn input(&self, window: &SeriesWindow) -> Result<Vec<f64>> {
        let mut x: Vec<f64> = window.normalized_past()?.iter().map(|v| v.ln()).collect();
        x.extend_from_slice(&window.context);
        if x.len() != self.config.input_width {
            return Err(Error::Shape(format!(
                "window gives {} inputs ({} past, {} context); the network expects {}",
                x.len(),
                window.past.len(),
                window.context.len(),
                self.config.input_width
            )));
        }
        Ok(x)
    }

    fn prepare(&self, window: &SeriesWindow) -> Result<Prepared> {
        let targets = window.normalized_future()?;
        if targets.len() != self.config.horizon {
            return Err(Error::Shape(format!(
                "window has {} targets for a horizon of {}",
                targets.len(),
                self.config.horizon
            )));
        }
        Ok(Prepared {
            input: self.input(window)?,
            s0: window.normalized_anchor()?,
            targets,
        })
    }

    fn heads(&self, raw: &[f64]) -> Result<MappedHeads> {
        map_heads(raw, self.config.jumps)
    }

    /// Coefficient schedule for a normalized window, from one forward pass.
    pub fn predict_schedule(&self, window: &SeriesWindow) -> Result<ParamSchedule> {
        let raw = self.net.forward(&self.input(window)?);
        ParamSchedule::new(self.heads(&raw)?.params)
    }

    /// `Σ_τ (−ψ_τ + ω (S_τ − Ŝ_τ)²)` on normalized values, where `ψ_τ` is the
    /// one-step log-density of `S_τ` from the configured anchor and `Ŝ_τ` is
    /// the conditional mean.
    pub fn loss(&self, window: &SeriesWindow, omega: f64, kappa: usize) -> Result<LossBreakdown> {
        self.loss_with(window, omega, kappa, false)
    }

    /// Same as [`Self::loss`], evaluating the horizon steps in parallel. The
    /// result is bitwise identical.
    pub fn loss_parallel(
        &self,
        window: &SeriesWindow,
        omega: f64,
        kappa: usize,
    ) -> Result<LossBreakdown> {
        self.loss_with(window, omega, kappa, true)
    }

    fn loss_with(
        &self,
        window: &SeriesWindow,
        omega: f64,
        kappa: usize,
        parallel: bool,
    ) -> Result<LossBreakdown> {
        let p = self.prepare(window)?;
        let schedule = self.predict_schedule(window)?;
        let anchor = self.config.anchor;
        let step = |tau: usize| -> Result<StepLoss> {
            let ln_prev = match anchor {
                Anchor::MeanBootstrapped => {
                    p.s0.ln() + schedule.cumulative_drift((tau - 1) as f64)?
                }
                Anchor::TeacherForced if tau > 1 => p.targets[tau - 2].ln(),
                Anchor::TeacherForced => p.s0.ln(),
            };
            let log_density = one_step_log_density(
                schedule.step(tau),
                ln_prev,
                p.targets[tau - 1].ln(),
                1.0,
                kappa,
            )?;
            let mean = schedule.conditional_mean(p.s0, tau as f64)?;
            Ok(StepLoss {
                log_density,
                squared_error: (p.targets[tau - 1] - mean).powi(2),
            })
        };
        let horizon = self.config.horizon;
        let per_step: Vec<StepLoss> = if parallel {
            (1..=horizon)
                .into_par_iter()
                .map(step)
                .collect::<Result<_>>()?
        } else {
            (1..=horizon).map(step).collect::<Result<_>>()?
        };
        let mut total = 0.0;
        for (i, s) in per_step.iter().enumerate() {
            total += -s.log_density + omega * s.squared_error;
            if !total.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite loss at step {}",
                    i + 1
                )));
            }
        }
        Ok(LossBreakdown { total, per_step })
    }

    /// Loss and its exact gradient with respect to the network parameters.
    pub fn gradient(
        &self,
        window: &SeriesWindow,
        omega: f64,
        kappa: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let p = self.prepare(window)?;
        let trace = self.net.forward_trace(&p.input);
        let heads = self.heads(trace.last().expect("output layer"))?;
        let horizon = self.config.horizon;
        let ln_s0 = p.s0.ln();
        let bootstrapped = self.config.anchor == Anchor::MeanBootstrapped;

        // cum[τ] = Σ_{j ≤ τ} μ_j
        let mut cum = vec![0.0; horizon + 1];
        for tau in 1..=horizon {
            cum[tau] = cum[tau - 1] + heads.params[tau - 1].mu();
        }

        let mut loss = 0.0;
        // ∂L/∂(μ, σ, λ, ν, γ) per step
        let mut d_coef = vec![[0.0; HEADS]; horizon];
        // ∂L/∂ ln_prev_τ and ∂L/∂ Ŝ_τ · Ŝ_τ per step, propagated to μ below
        let mut d_anchor = vec![0.0; horizon];
        let mut d_mean = vec![0.0; horizon];
        for tau in 1..=horizon {
            let params = &heads.params[tau - 1];
            let ln_prev = if bootstrapped {
                ln_s0 + cum[tau - 1]
            } else if tau > 1 {
                p.targets[tau - 2].ln()
            } else {
                ln_s0
            };
            let (psi, g) =
                one_step_log_density_grad(params, ln_prev, p.targets[tau - 1].ln(), 1.0, kappa)?;
            let mean = p.s0 * cum[tau].exp();
            let resid = p.targets[tau - 1] - mean;
            loss += -psi + omega * resid * resid;
            if !loss.is_finite() {
                return Err(Error::numerical(format!("non-finite loss at step {tau}")));
            }
            d_coef[tau - 1] = [-g.mu, -g.sigma, -g.lambda, -g.nu, -g.gamma];
            if bootstrapped {
                d_anchor[tau - 1] = -g.ln_prev;
            }
            d_mean[tau - 1] = -2.0 * omega * resid * mean;
        }
        // μ_j moves the anchors of steps τ > j and the means of steps τ ≥ j
        let mut suffix = 0.0;
        for j in (0..horizon).rev() {
            suffix += d_mean[j];
            d_coef[j][0] += suffix;
            suffix += d_anchor[j];
        }

        let d_raw: Vec<f64> = d_coef
            .iter()
            .zip(&heads.slopes)
            .flat_map(|(d, s)| (0..HEADS).map(move |h| d[h] * s[h]))
            .collect();
        let mut grad = vec![0.0; self.net.n_params()];
        self.net.backward(&trace, &d_raw, &mut grad);
        Ok((loss, grad))
    }

    /// Mean loss and mean gradient over `windows`. Per-window terms are
    /// computed in parallel and reduced in window order.
    pub fn batch_gradient(&self, windows: &[&SeriesWindow]) -> Result<(f64, Vec<f64>)> {
        let (omega, kappa) = (self.config.omega, self.config.kappa);
        let parts: Vec<(f64, Vec<f64>)> = windows
            .par_iter()
            .map(|w| self.gradient(w, omega, kappa))
            .collect::<Result<_>>()?;
        let n = windows.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.net.n_params()];
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    /// Mean loss over `windows`, reduced in window order.
    pub fn mean_loss(&self, windows: &[SeriesWindow]) -> Result<f64> {
        let (omega, kappa) = (self.config.omega, self.config.kappa);
        let losses: Vec<f64> = windows
            .par_iter()
            .map(|w| self.loss(w, omega, kappa).map(|l| l.total))
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / windows.len() as f64)
    }
}
