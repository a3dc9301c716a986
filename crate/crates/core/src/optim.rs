//! Derivative-free minimization with the Nelder–Mead simplex method.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ...and the simplex diameter falls below this.
    pub x_tol: f64,
    /// Initial simplex edge along each coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            f_tol: 1e-9,
            x_tol: 1e-7,
            initial_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. Non-finite objective values are treated as `+∞`,
/// which lets callers reject infeasible points.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    config: &NelderMeadConfig,
) -> Minimum {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += config.initial_step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= config.f_tol && diameter <= config.x_tol {
            converged = true;
            break;
        }
        if evals.get() >= config.max_evals {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let worst = simplex[n].0.clone();
        let reflected = along(REFLECT, &worst);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(EXPAND, &worst);
            let fe = eval(&expanded);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[n].1 {
            let c = along(CONTRACT, &worst);
            let v = eval(&c);
            (c, v)
        } else {
            let c = along(-CONTRACT, &worst);
            let v = eval(&c);
            (c, v)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + SHRINK * (v - b))
                .collect();
            let v = eval(&x);
            *vertex = (x, v);
        }
    }

    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evals: evals.get(),
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let cfg = NelderMeadConfig {
            max_evals: 10_000,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &cfg);
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn quadratic_five_dims_and_monotone_trace() {
        let target = [0.3, -1.0, 2.0, 0.0, 0.7];
        let f = |x: &[f64]| {
            x.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).powi(2) * 3.0)
                .sum()
        };
        let m = nelder_mead(f, &[0.0; 5], &NelderMeadConfig::default());
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // minimum of x² lies in the rejected half-plane; constrained optimum at 0.5
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::NAN
            } else {
                x[0] * x[0] + x[1] * x[1]
            }
        };
        let m = nelder_mead(f, &[2.0, 1.0], &NelderMeadConfig::default());
        assert!(m.x[0] >= 0.5 && (m.x[0] - 0.5).abs() < 1e-3);
        assert!(m.value.is_finite());
    }

    #[test]
    fn budget_exhaustion_reports_not_converged() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let m = nelder_mead(
            f,
            &[0.0, 0.0],
            &NelderMeadConfig {
                max_evals: 10,
                ..Default::default()
            },
        );
        assert!(!m.converged);
        assert!(m.value < 10.0);
    }
}
