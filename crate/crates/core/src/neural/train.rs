use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::model::NeuralModel;
use crate::data::SeriesWindow;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Shuffle streams start here, clear of the initialization stream.
const SHUFFLE_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training-batch loss over the epoch (at initialization for epoch 0).
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
    /// A loss or parameter became non-finite; the best earlier weights are
    /// returned.
    Diverged {
        epoch: usize,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    fn new(n: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub current: Vec<f64>,
    pub optimizer: AdamState,
    pub best: Vec<f64>,
    pub best_valid: f64,
    pub best_epoch: usize,
    pub stale_epochs: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// The model with the best validation loss.
    pub model: NeuralModel,
    pub state: TrainState,
    pub stop: StopReason,
}

fn clip(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Mini-batch Adam on the mean window loss with early stopping on the
/// validation loss. Windows must be normalized.
///
/// Deterministic for a fixed config: batch order comes from the seed and
/// per-batch gradients are reduced in window order. Passing `resume`
/// continues from a saved state until `config.max_epochs` epochs in total.
pub fn train(
    config: &NetworkConfig,
    train: &[SeriesWindow],
    valid: &[SeriesWindow],
    resume: Option<TrainState>,
) -> Result<TrainOutcome> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::data(
            "training needs non-empty train and validation splits",
        ));
    }
    let mut model = NeuralModel::new(config.clone())?;
    let n = model.net.n_params();
    let mut state = match resume {
        Some(s) => {
            if s.current.len() != n || s.best.len() != n || s.optimizer.m.len() != n {
                return Err(Error::Shape(
                    "resume state does not match the network".into(),
                ));
            }
            model.net.params_mut().copy_from_slice(&s.current);
            s
        }
        None => {
            let valid_loss = model.mean_loss(valid)?;
            let train_loss = model.mean_loss(train)?;
            info!("epoch 0: train {train_loss:.6} valid {valid_loss:.6}");
            TrainState {
                epoch: 0,
                current: model.net.params().to_vec(),
                optimizer: AdamState::new(n),
                best: model.net.params().to_vec(),
                best_valid: valid_loss,
                best_epoch: 0,
                stale_epochs: 0,
                history: vec![EpochRecord {
                    epoch: 0,
                    train_loss,
                    valid_loss,
                }],
            }
        }
    };

    let mut stop = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..train.len()).collect();
    while state.epoch < config.max_epochs {
        if state.stale_epochs >= config.patience {
            stop = StopReason::EarlyStopped;
            break;
        }
        let epoch = state.epoch + 1;
        order.sort_unstable();
        StreamRng::new(config.seed, SHUFFLE_STREAM_BASE + epoch as u64).shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut diverged = None;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SeriesWindow> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, mut grad) = match model.batch_gradient(&batch) {
                Ok(r) => r,
                Err(Error::Numerical(e)) => {
                    diverged = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            };
            clip(&mut grad, config.grad_clip);
            state
                .optimizer
                .update(model.net.params_mut(), &grad, config.learning_rate);
            if model.net.params().iter().any(|p| !p.is_finite()) {
                diverged = Some("non-finite weights after an update".into());
                break;
            }
            loss_sum += loss;
            batches += 1;
        }
        let valid_loss = match diverged {
            None => match model.mean_loss(valid) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(v) => {
                    diverged = Some(format!("validation loss {v}"));
                    None
                }
                Err(Error::Numerical(e)) => {
                    diverged = Some(e);
                    None
                }
                Err(e) => return Err(e),
            },
            Some(_) => None,
        };
        let Some(valid_loss) = valid_loss else {
            let detail = diverged.unwrap_or_default();
            warn!(
                "training diverged in epoch {epoch}: {detail}; keeping epoch {} weights",
                state.best_epoch
            );
            stop = StopReason::Diverged { epoch, detail };
            break;
        };

        let train_loss = loss_sum / batches as f64;
        info!("epoch {epoch}: train {train_loss:.6} valid {valid_loss:.6}");
        state.epoch = epoch;
        state.current.copy_from_slice(model.net.params());
        state.history.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
        });
        if valid_loss < state.best_valid {
            state.best_valid = valid_loss;
            state.best_epoch = epoch;
            state.best.copy_from_slice(model.net.params());
            state.stale_epochs = 0;
        } else {
            state.stale_epochs += 1;
        }
    }

    model.net.params_mut().copy_from_slice(&state.best);
    Ok(TrainOutcome { model, state, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut adam = AdamState::new(2);
        for _ in 0..5000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            adam.update(&mut p, &g, 0.01);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-3), "{p:?}");
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![30.0, 40.0];
        assert_eq!(clip(&mut g, 10.0), 50.0);
        assert!((g[0] - 6.0).abs() < 1e-12 && (g[1] - 8.0).abs() < 1e-12);
    }
}
