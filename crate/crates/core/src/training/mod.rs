//! Maximum-likelihood fitting: minibatch NLL with gradients from the tape,
//! per-tensor norm clipping, Adam, checkpoints and the coin-flip MLE.

mod builder;
mod checkpoint;
mod coin;
mod fit;
mod loss;
mod optim;

pub use builder::FlowSpec;
pub use checkpoint::{ArrayRecord, Checkpoint, OptimizerRecord, CHECKPOINT_VERSION};
pub use coin::{coin_mle, CoinTable};
pub use fit::{fit, write_history_csv, LossRecord, Trainer, VALIDATION_FRACTION};
pub use loss::{loss_and_grads, nll_loss, LossGrads, NllNodes, CHUNK_ROWS};
pub use optim::{adam_step, clip_by_norm, AdamState};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Each gradient tensor is rescaled to at most this L2 norm.
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Write a checkpoint every this many steps; 0 disables.
    pub checkpoint_every: usize,
    /// Evaluate the held-out NLL every this many steps; 0 disables.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            clip_norm: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 256,
            max_steps: 2000,
            seed: 0,
            checkpoint_every: 0,
            eval_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("learning_rate", self.learning_rate)?;
        positive("clip_norm", self.clip_norm)?;
        positive("adam_eps", self.adam_eps)?;
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        Ok(())
    }
}
