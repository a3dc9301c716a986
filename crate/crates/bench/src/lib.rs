//! Fixtures shared by the benchmarks.

use nmjd_core::{MjdParams, NetworkConfig, ParamSchedule, SeriesWindow};

/// Synthetic-range parameters.
pub fn params() -> MjdParams {
    MjdParams::new(0.3, 0.2, 6.5, 0.0, 0.75).expect("valid parameters")
}

/// A ten-step schedule with varying coefficients.
pub fn schedule() -> ParamSchedule {
    let steps = (0..10)
        .map(|t| {
            let x = t as f64 / 10.0;
            MjdParams::new(
                0.2 + 0.1 * x,
                0.2 + 0.1 * x,
                3.0 + 5.0 * x,
                0.05 - 0.1 * x,
                0.5 + 0.3 * x,
            )
            .expect("valid parameters")
        })
        .collect();
    ParamSchedule::new(steps).expect("non-empty schedule")
}

/// A normalized window of ten past and ten future values.
pub fn window() -> SeriesWindow {
    let path = |t: usize| 1.0 + 0.05 * t as f64 + 0.1 * ((t * 7) as f64).sin();
    let mut w = SeriesWindow::new(
        "bench",
        (0..10).map(path).collect(),
        (10..20).map(path).collect(),
    );
    w.norm_scale = Some(2.0);
    w
}

/// The desk-scale network: 10 inputs, two hidden layers of 64, ten steps.
pub fn network() -> NetworkConfig {
    NetworkConfig::new(10, vec![64, 64], 10)
}
