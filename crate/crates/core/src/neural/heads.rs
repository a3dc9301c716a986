//! Map from raw network outputs to per-step coefficients.

use crate::error::{Error, Result};
use crate::sde::MjdParams;

pub const MU_BOUND: f64 = 3.0;
pub const NU_BOUND: f64 = 2.0;
pub const LAMBDA_CAP: f64 = 20.0;
/// Added to the softplus of the volatility heads to keep them positive.
pub const POSITIVE_OFFSET: f64 = 1e-4;

/// Outputs per horizon step, in the order `μ, σ, λ, ν, γ`.
pub const HEADS: usize = 5;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn clamp_with_slope(x: f64, bound: f64) -> (f64, f64) {
    if x.abs() <= bound {
        (x, 1.0)
    } else {
        (x.clamp(-bound, bound), 0.0)
    }
}

/// Per-step coefficients plus `d coefficient / d raw` for each head.
pub(crate) struct MappedHeads {
    pub params: Vec<MjdParams>,
    pub slopes: Vec<[f64; HEADS]>,
}

/// With `jumps == false` the intensity is pinned at zero and its slope is 0.
pub(crate) fn map_heads(raw: &[f64], jumps: bool) -> Result<MappedHeads> {
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "non-finite network output at index {i}"
        )));
    }
    let mut params = Vec::with_capacity(raw.len() / HEADS);
    let mut slopes = Vec::with_capacity(raw.len() / HEADS);
    for r in raw.chunks_exact(HEADS) {
        let (mu, d_mu) = clamp_with_slope(r[0], MU_BOUND);
        let sigma = softplus(r[1]) + POSITIVE_OFFSET;
        let (lambda, d_lambda) = if !jumps {
            (0.0, 0.0)
        } else {
            let sp = softplus(r[2]);
            if sp <= LAMBDA_CAP {
                (sp, sigmoid(r[2]))
            } else {
                (LAMBDA_CAP, 0.0)
            }
        };
        let (nu, d_nu) = clamp_with_slope(r[3], NU_BOUND);
        let gamma = softplus(r[4]) + POSITIVE_OFFSET;
        params.push(MjdParams::new(mu, sigma, lambda, nu, gamma)?);
        slopes.push([d_mu, sigmoid(r[1]), d_lambda, d_nu, sigmoid(r[4])]);
    }
    Ok(MappedHeads { params, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_outputs() {
        let m = map_heads(&[0.0; 10], true).unwrap();
        for p in &m.params {
            assert_eq!((p.mu(), p.nu()), (0.0, 0.0));
            let ln2 = std::f64::consts::LN_2;
            assert!((p.sigma() - ln2 - POSITIVE_OFFSET).abs() < 1e-12);
            assert!((p.lambda() - ln2).abs() < 1e-12);
            assert!((p.gamma() - ln2 - POSITIVE_OFFSET).abs() < 1e-12);
        }
    }

    #[test]
    fn ranges_and_slopes() {
        let m = map_heads(&[10.0, -50.0, 100.0, -7.0, 800.0], true).unwrap();
        let p = m.params[0];
        assert_eq!((p.mu(), p.lambda(), p.nu()), (3.0, 20.0, -2.0));
        assert!(p.sigma() >= POSITIVE_OFFSET && p.gamma() > 799.0);
        assert_eq!(m.slopes[0][0], 0.0);
        assert_eq!(m.slopes[0][2], 0.0);
        let no_jumps = map_heads(&[0.0; 5], false).unwrap();
        assert_eq!(no_jumps.params[0].lambda(), 0.0);
        assert!(map_heads(&[f64::NAN; 5], true).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        let h = 1e-6;
        for x in [-3.0, 0.2, 4.0] {
            assert!(((softplus(x + h) - softplus(x - h)) / (2.0 * h) - sigmoid(x)).abs() < 1e-8);
        }
    }
}
