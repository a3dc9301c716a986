use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Anchor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

fn default_patience() -> usize {
    5
}
fn default_jumps() -> bool {
    true
}
fn default_grad_clip() -> f64 {
    10.0
}
fn default_anchor() -> Anchor {
    Anchor::MeanBootstrapped
}

/// Network shape and training settings.
///
/// `input_width` is the past length plus the context width. The fields after
/// `seed` have defaults and may be omitted from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_width: usize,
    pub hidden_sizes: Vec<usize>,
    pub horizon: usize,
    pub activation: Activation,
    /// Weight of the squared-error penalty on the conditional mean.
    pub omega: f64,
    pub kappa: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// `false` pins the jump intensity at zero (a learned Black–Scholes
    /// schedule).
    #[serde(default = "default_jumps")]
    pub jumps: bool,
    /// Global gradient-norm clip.
    #[serde(default = "default_grad_clip")]
    pub grad_clip: f64,
    #[serde(default = "default_anchor")]
    pub anchor: Anchor,
}

impl NetworkConfig {
    /// Defaults for everything but the shape.
    pub fn new(input_width: usize, hidden_sizes: Vec<usize>, horizon: usize) -> Self {
        Self {
            input_width,
            hidden_sizes,
            horizon,
            activation: Activation::Tanh,
            omega: 1.0,
            kappa: 5,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 30,
            seed: 0,
            patience: default_patience(),
            jumps: true,
            grad_clip: default_grad_clip(),
            anchor: default_anchor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.input_width == 0 {
            return fail("input_width must be at least 1");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return fail("hidden_sizes must be non-empty with positive widths");
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1");
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return fail("omega must be finite and non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return fail("grad_clip must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_field_is_named() {
        let json = r#"{"input_width":10,"hidden_sizes":[8],"horizon":3,"activation":"tanh",
                      "omega":1.0,"kappa":5,"learning_rate":0.001,"batch_size":4,"seed":1}"#;
        let err = serde_json::from_str::<NetworkConfig>(json)
            .unwrap_err()
            .to_string();
        assert!(err.contains("max_epochs"), "{err}");
    }

    #[test]
    fn defaults_and_round_trip() {
        let c = NetworkConfig::new(10, vec![16], 10);
        assert_eq!(c.omega, 1.0);
        let back: NetworkConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(NetworkConfig::new(10, vec![], 10).validate().is_err());
        assert!(NetworkConfig { omega: -1.0, ..c }.validate().is_err());
    }
}
