//! Learning-rate decay driven by validation loss.
//!
//! The default reading is a patience window: after eight consecutive epochs
//! without improvement over the best seen loss, the rate halves and the
//! counter resets. The alternate reading — a fixed check every eight epochs —
//! is available behind [`ScheduleMode::FixedInterval`].

use serde::{Deserialize, Serialize};

use super::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    #[default]
    Patience,
    FixedInterval,
}

#[derive(Debug, Clone)]
pub struct LrSchedule {
    mode: ScheduleMode,
    patience: usize,
    factor: f64,
    lr: f64,
    best: f64,
    epochs_since_best: usize,
    window_len: usize,
    window_improved: bool,
}

impl LrSchedule {
    pub fn new(cfg: &TrainConfig) -> Self {
        LrSchedule {
            mode: cfg.schedule_mode,
            patience: cfg.patience_epochs,
            factor: cfg.decay_factor,
            lr: cfg.lr0,
            best: f64::INFINITY,
            epochs_since_best: 0,
            window_len: 0,
            window_improved: false,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch's validation loss, returns the rate for the next
    /// epoch. The sequence of returned rates is non-increasing.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        let improved = val_loss < self.best;
        if improved {
            self.best = val_loss;
        }
        match self.mode {
            ScheduleMode::Patience => {
                if improved {
                    self.epochs_since_best = 0;
                } else {
                    self.epochs_since_best += 1;
                    if self.epochs_since_best >= self.patience {
                        self.lr *= self.factor;
                        self.epochs_since_best = 0;
                    }
                }
            }
            ScheduleMode::FixedInterval => {
                self.window_improved |= improved;
                self.window_len += 1;
                if self.window_len >= self.patience {
                    if !self.window_improved {
                        self.lr *= self.factor;
                    }
                    self.window_len = 0;
                    self.window_improved = false;
                }
            }
        }
        self.lr
    }
}

/// Replays an ordered validation-loss history from `cfg.lr0` and returns the
/// resulting rate.
pub fn lr_schedule(history: &[f64], cfg: &TrainConfig) -> f64 {
    let mut s = LrSchedule::new(cfg);
    for &l in history {
        s.observe(l);
    }
    s.lr()
}
