//! Window-level forecasting with either the learned schedule or a stationary
//! baseline fitted to the window's own past.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{fit_bs, fit_mjd, FitConfig};
use crate::data::SeriesWindow;
use crate::error::{Error, Result};
use crate::forecast::{sample_forecast, ForecastBundle};
use crate::likelihood::{horizon_log_likelihood, Anchor};
use crate::neural::NeuralModel;
use crate::sde::ParamSchedule;
use crate::solver::{SolverConfig, SolverMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Bs,
    Mjd,
}

impl FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bs" => Ok(Self::Bs),
            "mjd" => Ok(Self::Mjd),
            _ => Err(Error::invalid(format!("unknown baseline {s:?} (bs|mjd)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Forecaster<'a> {
    Neural(&'a NeuralModel),
    Baseline { kind: Baseline, fit: FitConfig },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub k: usize,
    pub steps_per_unit: usize,
    pub mode: SolverMode,
    pub seed: u64,
    pub kappa: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowForecast {
    /// Schedule in normalized units.
    pub schedule: ParamSchedule,
    /// Samples and mean in raw units.
    pub bundle: ForecastBundle,
    /// Mean-bootstrapped one-step log-densities of the window's future, when
    /// it has one.
    pub step_log_densities: Option<Vec<f64>>,
}

fn schedule_for(
    forecaster: &Forecaster,
    window: &SeriesWindow,
    horizon: usize,
    kappa: usize,
) -> Result<ParamSchedule> {
    match forecaster {
        Forecaster::Neural(model) => {
            if model.config.horizon != horizon {
                return Err(Error::Shape(format!(
                    "model horizon {} differs from the requested {horizon}",
                    model.config.horizon
                )));
            }
            model.predict_schedule(window)
        }
        Forecaster::Baseline { kind, fit } => {
            let past = window.normalized_past()?;
            let params = match kind {
                Baseline::Bs => fit_bs(&past)?.params(),
                Baseline::Mjd => fit_mjd(&past, kappa, fit)?.params,
            };
            ParamSchedule::constant(params, horizon)
        }
    }
}

/// Forecasts one normalized window. Window `index` draws its `k` samples
/// from streams `index·k ..` of the sampling seed, so results do not depend
/// on which other windows are forecast.
pub fn forecast_window(
    forecaster: &Forecaster,
    window: &SeriesWindow,
    index: usize,
    horizon: usize,
    sampling: &SamplingConfig,
) -> Result<WindowForecast> {
    let schedule = schedule_for(forecaster, window, horizon, sampling.kappa)?;
    let scale = window.norm_scale.ok_or_else(|| {
        Error::data(format!(
            "window {}@{} is not normalized",
            window.series_id, window.offset
        ))
    })?;
    let s0 = window.normalized_anchor()?;
    let solver = SolverConfig::new(sampling.steps_per_unit, sampling.mode, sampling.seed);
    let bundle = sample_forecast(
        &schedule,
        s0,
        sampling.k,
        &solver,
        (index * sampling.k) as u64,
        sampling.kappa,
    )?
    .rescaled(scale);
    let step_log_densities = if window.future.len() == horizon {
        let targets = window.normalized_future()?;
        Some(
            horizon_log_likelihood(
                &schedule,
                s0,
                &targets,
                sampling.kappa,
                Anchor::MeanBootstrapped,
            )?
            .per_step,
        )
    } else {
        None
    };
    Ok(WindowForecast {
        schedule,
        bundle,
        step_log_densities,
    })
}

/// [`forecast_window`] over all windows in parallel, results in window order.
pub fn forecast_windows(
    forecaster: &Forecaster,
    windows: &[SeriesWindow],
    horizon: usize,
    sampling: &SamplingConfig,
) -> Result<Vec<WindowForecast>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| forecast_window(forecaster, w, i, horizon, sampling))
        .collect()
}
