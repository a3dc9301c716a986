//! Forecasting with non-stationary Merton jump diffusions.
//!
//! A predictor maps a window of past values to a piecewise-constant schedule
//! of jump-diffusion coefficients over the forecast horizon. The schedule has
//! a closed-form conditional mean and a truncated closed-form likelihood, so
//! it can be fitted by maximum likelihood and sampled with an Euler–Maruyama
//! solver that restarts from the analytic mean at each unit interval.

pub mod calibrate;
pub mod data;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod likelihood;
pub mod neural;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod sde;
pub mod solver;

pub use calibrate::{
    fit_bs, fit_bs_log, fit_mjd, fit_mjd_log, forecast_stationary, BsFit, FitConfig, MjdFit,
};
pub use data::{
    generate_synthetic, prepare_dataset, read_series_csv, rebuild_dataset, split_by_dates,
    split_by_fractions, windowize, write_series_csv, DatasetManifest, DatasetRecipe, DateRange,
    NormScope, NormalizationTable, PreparedDataset, Series, SeriesWindow, SplitRule, Splits,
    SyntheticSet,
};
pub use error::{Error, Result};
pub use eval::{
    adjusted_r2, point_metrics, protocol_metrics, render_table, PointMetrics, ProtocolReport,
};
pub use forecast::{sample_forecast, ForecastBundle};
pub use likelihood::{
    horizon_log_likelihood, one_step_log_density, truncation_error_bound, Anchor, BoundBranch,
    HorizonLikelihood, TruncationBound, TruncationConfig,
};
pub use neural::{train, ModelCheckpoint, NetworkConfig, NeuralModel, TrainOutcome};
pub use pipeline::{
    forecast_window, forecast_windows, Baseline, Forecaster, SamplingConfig, WindowForecast,
};
pub use rng::StreamRng;
pub use sde::{
    conditional_mean, expected_jump_ratio, log_return_moments, stationary_cumulants, step_index,
    Cumulants, MjdParams, MomentPair, ParamRecord, ParamSchedule,
};
pub use solver::{
    empirical_weak_error, simulate, simulate_paths, simulate_restart, simulate_vanilla, Observable,
    RestartAnchor, SimPath, SolverConfig, SolverMode, WeakErrorRow,
};
