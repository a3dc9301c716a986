//! Sampled forecasts of a schedule over its horizon.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::likelihood::{horizon_log_likelihood, Anchor};
use crate::sde::ParamSchedule;
use crate::solver::{simulate, SolverConfig};

/// `K` sampled trajectories at the integer times `1..=T_f`, each with the
/// model's own horizon log-likelihood, plus the closed-form mean trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastBundle {
    pub samples: Vec<Vec<f64>>,
    pub log_likelihoods: Vec<f64>,
    pub mean: Vec<f64>,
}

impl ForecastBundle {
    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// Pointwise average of the sampled trajectories.
    pub fn sample_average(&self) -> Vec<f64> {
        let k = self.k() as f64;
        (0..self.horizon())
            .map(|t| self.samples.iter().map(|s| s[t]).sum::<f64>() / k)
            .collect()
    }

    /// Multiplies every value by `scale` (log-likelihoods of log-prices are
    /// unchanged by a common rescaling).
    pub fn rescaled(&self, scale: f64) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| s.iter().map(|v| v * scale).collect())
                .collect(),
            log_likelihoods: self.log_likelihoods.clone(),
            mean: self.mean.iter().map(|v| v * scale).collect(),
        }
    }
}

/// Draws `k` trajectories from `schedule` starting at `s0`. Trajectory `j`
/// uses stream `stream_offset + j` of `solver.seed`. Each trajectory is scored
/// teacher-forced on its own previous values.
pub fn sample_forecast(
    schedule: &ParamSchedule,
    s0: f64,
    k: usize,
    solver: &SolverConfig,
    stream_offset: u64,
    kappa: usize,
) -> Result<ForecastBundle> {
    let mut samples = Vec::with_capacity(k);
    let mut log_likelihoods = Vec::with_capacity(k);
    for j in 0..k as u64 {
        let traj = simulate(schedule, s0, solver, stream_offset + j)?.integer_values();
        log_likelihoods
            .push(horizon_log_likelihood(schedule, s0, &traj, kappa, Anchor::TeacherForced)?.total);
        samples.push(traj);
    }
    let mean = (1..=schedule.horizon())
        .map(|tau| schedule.conditional_mean(s0, tau as f64))
        .collect::<Result<_>>()?;
    Ok(ForecastBundle {
        samples,
        log_likelihoods,
        mean,
    })
}
