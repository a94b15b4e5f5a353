//! Training stack: categorical cross-entropy from logits, Adam, the
//! patience-based learning-rate decay, the 3x data augmentation, k-fold
//! splitting and the epoch loop.

mod adam;
mod augment;
mod fit;
mod kfold;
mod loss;
mod schedule;

pub use adam::{adam_step, AdamState};
pub use augment::{augment_sample, build_training_pool};
pub use fit::{fit, EpochLog, FitOutcome, TrainingLog};
pub use kfold::{kfold_split, FoldPlan};
pub use loss::{cross_entropy, one_hot};
pub use schedule::{lr_schedule, LrSchedule, ScheduleMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The training recipe: batch 32, Adam at 1e-3 with standard moments, halving
/// the rate after eight epochs without validation-loss improvement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    pub patience_epochs: usize,
    pub decay_factor: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub schedule_mode: ScheduleMode,
    /// Stop once training accuracy reaches this fraction (memorization
    /// checks); `None` runs all epochs.
    #[serde(default)]
    pub stop_at_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr0: 0.001,
            patience_epochs: 8,
            decay_factor: 0.5,
            max_epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            schedule_mode: ScheduleMode::Patience,
            stop_at_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.lr0 <= 0.0 {
            return Err(Error::InvalidConfig(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.decay_factor) || self.decay_factor == 0.0 {
            return Err(Error::InvalidConfig(format!("decay_factor must lie in (0,1), got {}", self.decay_factor)));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}
