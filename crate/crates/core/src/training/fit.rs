//! The epoch loop: seeded shuffling, mini-batches, cross-entropy descent with
//! Adam, validation after every epoch, patience-based decay and retention of
//! the best-validation-accuracy weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use serde::Serialize;

use crate::data::{batch_tensor, labels_one_hot, Sample};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::Model;
use crate::tensor::Tape;

use super::{adam_step, cross_entropy, AdamState, LrSchedule, TrainConfig};

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc,lr\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.6},{:.4},{:.6},{:.4},{:.6}\n",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOutcome {
    pub log: TrainingLog,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

fn argmax_rows(data: &[f64], k: usize) -> Vec<usize> {
    data.chunks(k)
        .map(|row| row.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).map(|(i, _)| i).unwrap())
        .collect()
}

/// Mean cross-entropy and accuracy (fraction in [0,1]) over a sample set in
/// eval mode.
pub fn eval_metrics(model: &Model, samples: &[Sample], batch_size: usize) -> Result<(f64, f64)> {
    let k = model.config.num_classes;
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in samples.chunks(batch_size) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let x = batch_tensor(&refs)?;
        let y = labels_one_hot(&refs, k)?;
        let tape = Tape::inference();
        let logits = model.forward(&tape, &x, Mode::Eval)?;
        let loss = cross_entropy(&tape, &logits, &y)?;
        loss_sum += loss.item() * chunk.len() as f64;
        let preds = argmax_rows(&logits.data(), k);
        correct += preds.iter().zip(chunk).filter(|(p, s)| **p == s.label).count();
    }
    Ok((loss_sum / samples.len() as f64, correct as f64 / samples.len() as f64))
}

/// Trains `model` in place. Returns the per-epoch log; the model ends up
/// holding the weights of its best validation-accuracy epoch.
pub fn fit(model: &Model, train: &[Sample], val: &[Sample], cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::data("fit requires non-empty train and validation splits"));
    }
    let k = model.config.num_classes;
    for s in train.iter().chain(val) {
        if s.label >= k {
            return Err(Error::data(format!("sample {} has label {} outside the {k}-class model", s.id, s.label)));
        }
    }

    let params = model.params();
    let mut adam = AdamState::new(&params);
    let mut schedule = LrSchedule::new(cfg);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = TrainingLog::default();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_weights: Vec<Vec<f64>> = params.iter().map(|p| p.value.to_vec()).collect();

    let mut indices: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let lr = schedule.lr();
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch_idx in indices.chunks(cfg.batch_size) {
            let refs: Vec<&Sample> = batch_idx.iter().map(|&i| &train[i]).collect();
            let x = batch_tensor(&refs)?;
            let y = labels_one_hot(&refs, k)?;
            let tape = Tape::new();
            let logits = model.forward(&tape, &x, Mode::Train)?;
            let loss = cross_entropy(&tape, &logits, &y)?;
            loss_sum += loss.item() * refs.len() as f64;
            let preds = argmax_rows(&logits.data(), k);
            correct += preds.iter().zip(&refs).filter(|(p, s)| **p == s.label).count();
            model.zero_grad();
            tape.backward(&loss)?;
            adam_step(&params, &mut adam, cfg, lr)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        let train_acc = correct as f64 / train.len() as f64;
        let (val_loss, val_acc) = eval_metrics(model, val, cfg.batch_size)?;
        schedule.observe(val_loss);
        log.epochs.push(EpochLog { epoch, train_loss, train_acc, val_loss, val_acc, lr });
        if val_acc > best_acc {
            best_acc = val_acc;
            best_epoch = epoch;
            best_weights = params.iter().map(|p| p.value.to_vec()).collect();
        }
        if let Some(target) = cfg.stop_at_train_acc {
            if train_acc >= target {
                break;
            }
        }
    }

    for (p, w) in params.iter().zip(&best_weights) {
        p.value.data_mut().copy_from_slice(w);
    }
    Ok(FitOutcome { log, best_epoch, best_val_accuracy: best_acc })
}
