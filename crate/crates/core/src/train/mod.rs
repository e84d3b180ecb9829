//! Objective, optimizer and the epoch loop.

mod adam;
mod config;
pub mod loss;
mod trainer;

pub use adam::{adam_step, lr_schedule, AdamState, BETA1, BETA2, EPSILON};
pub use config::{ProfileSpec, TrainConfig};
pub use loss::{total_loss, LossTerms, LossWeights};
pub use trainer::{batch_gradient, train, train_from, window_objective, EpochLog, TrainOutcome, Trainer};
