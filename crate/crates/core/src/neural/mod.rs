//! The learned schedule predictor and its training loop.

mod checkpoint;
mod config;
mod heads;
mod mlp;
mod model;
mod train;

pub use checkpoint::{ModelCheckpoint, TrainMeta, FORMAT_VERSION};
pub use config::{Activation, NetworkConfig};
pub use heads::{softplus, HEADS, LAMBDA_CAP, MU_BOUND, NU_BOUND, POSITIVE_OFFSET};
pub use mlp::{LayerShape, Mlp};
pub use model::{LossBreakdown, NeuralModel, StepLoss};
pub use train::{train, AdamState, EpochRecord, StopReason, TrainOutcome, TrainState};

#[cfg(test)]
mod tests;
