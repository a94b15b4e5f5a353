//! Full network assembly: stem(66) -> dual-path(72) -> stem(78) ->
//! dual-path(84), with taps after blocks 1-3 passing through PWFS (when
//! enabled) and global average pooling, the block-4 output pooled directly,
//! everything concatenated into the fusion vector and classified by a dense
//! layer.

mod audit;
mod serialize;

pub use audit::{audit_parameters, AuditReport, AuditRow, REFERENCE_PARAM_COUNT};
pub use serialize::{config_hash, load_weights, save_weights};

use std::cell::RefCell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocks::{pwfs, DualPathBlock, PathWiring, StemBlock};
use crate::error::{Error, Result};
use crate::layers::{global_avg_pool, softmax, Dense, Mode};
use crate::tensor::ops::concat_features;
use crate::tensor::{Parameter, Tape, Tensor};

/// Architecture hyperparameters. The defaults reproduce the published
/// geometry: grayscale 64x64 input, widths 66/72/78/84, seven classes,
/// both PWFS and the attention block enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanmsffConfig {
    pub input_channels: usize,
    pub num_classes: usize,
    pub block_widths: [usize; 4],
    pub enable_massatt: bool,
    pub enable_pwfs: bool,
    pub dropout_rate: f64,
    pub input_size: usize,
    pub path_wiring: PathWiring,
}

impl Default for LanmsffConfig {
    fn default() -> Self {
        LanmsffConfig {
            input_channels: 1,
            num_classes: 7,
            block_widths: [66, 72, 78, 84],
            enable_massatt: true,
            enable_pwfs: true,
            dropout_rate: 0.25,
            input_size: 64,
            path_wiring: PathWiring::Shared,
        }
    }
}

impl LanmsffConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.input_channels == 1 || self.input_channels == 3) {
            return fail(format!("input_channels must be 1 or 3, got {}", self.input_channels));
        }
        if self.num_classes < 2 {
            return fail(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        let [w1, w2, w3, w4] = self.block_widths;
        if self.block_widths.contains(&0) {
            return fail(format!("block widths must be positive, got {:?}", self.block_widths));
        }
        // dual-path blocks shuffle-split their input and halve their width
        for (name, v) in [("width1", w1), ("width2", w2), ("width3", w3), ("width4", w4)] {
            if v % 2 != 0 {
                return fail(format!("{name}={v} must be even (shuffle split / path halves)"));
            }
        }
        if self.enable_pwfs {
            for (name, v) in [("width1", w1), ("width2", w2), ("width3", w3)] {
                if v % 3 != 0 {
                    return fail(format!("{name}={v} must be divisible by 3 when PWFS is enabled"));
                }
            }
        }
        if self.enable_massatt {
            for (name, v) in [("width2", w2), ("width4", w4)] {
                if v % 4 != 0 {
                    return fail(format!("{name}={v} must be divisible by 4 when the attention block is enabled"));
                }
            }
            if !self.input_size.is_multiple_of(32) {
                return fail(format!(
                    "input_size={} must be divisible by 32 so the attention round trip at block 4 is exact",
                    self.input_size
                ));
            }
        }
        if self.input_size < 16 || !self.input_size.is_multiple_of(16) {
            return fail(format!("input_size={} must be a positive multiple of 16 (four 2x2 poolings)", self.input_size));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate={} must lie in [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    /// Length of the concatenated multi-scale feature vector: with PWFS the
    /// first three taps shrink to a third, so `w1/3 + w2/3 + w3/3 + w4`
    /// (156 for the default widths); without it, the plain sum of widths.
    pub fn fusion_length(&self) -> usize {
        let [w1, w2, w3, w4] = self.block_widths;
        if self.enable_pwfs {
            w1 / 3 + w2 / 3 + w3 / 3 + w4
        } else {
            w1 + w2 + w3 + w4
        }
    }

    /// Expected (channels, spatial) at each block boundary.
    pub fn boundary_trace(&self) -> [(usize, usize); 4] {
        let s = self.input_size;
        let [w1, w2, w3, w4] = self.block_widths;
        [(w1, s / 2), (w2, s / 4), (w3, s / 8), (w4, s / 16)]
    }
}

/// Intermediate tensors of one forward pass, kept for fusion inspection and
/// Grad-CAM.
pub struct ForwardTrace {
    pub tap1: Tensor,
    pub tap2: Tensor,
    pub tap3: Tensor,
    /// Block-4 features before the final max pooling (the default Grad-CAM
    /// tap), spatial extent `input_size/8`.
    pub block4_prepool: Tensor,
    pub block4_out: Tensor,
    pub fused: Tensor,
    pub logits: Tensor,
}

/// The built network: configuration plus the ordered parameter set.
pub struct Model {
    pub config: LanmsffConfig,
    pub init_seed: u64,
    pub block1: StemBlock,
    pub block2: DualPathBlock,
    pub block3: StemBlock,
    pub block4: DualPathBlock,
    pub classifier: Dense,
    dropout_rng: RefCell<ChaCha8Rng>,
}

impl Model {
    /// Builds the network with fan-in-scaled uniform weights drawn from a
    /// ChaCha stream, so identical seeds give identical initial weights.
    pub fn build(config: &LanmsffConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [w1, w2, w3, w4] = config.block_widths;
        let block1 = StemBlock::new(config.input_channels, w1, config.dropout_rate, &mut rng)?;
        let block2 = DualPathBlock::new(w1, w2, config.path_wiring, config.enable_massatt, config.dropout_rate, &mut rng)?;
        let block3 = StemBlock::new(w2, w3, config.dropout_rate, &mut rng)?;
        let block4 = DualPathBlock::new(w3, w4, config.path_wiring, config.enable_massatt, config.dropout_rate, &mut rng)?;
        let classifier = Dense::new(config.fusion_length(), config.num_classes, true, &mut rng);
        Ok(Model {
            config: config.clone(),
            init_seed: seed,
            block1,
            block2,
            block3,
            block4,
            classifier,
            dropout_rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)),
        })
    }

    /// Stable, documented parameter order — the serialization contract.
    pub fn params(&self) -> Vec<Parameter> {
        let mut out = Vec::new();
        self.block1.collect_params("block1", &mut out);
        self.block2.collect_params("block2", &mut out);
        self.block3.collect_params("block3", &mut out);
        self.block4.collect_params("block4", &mut out);
        self.classifier.collect_params("classifier", &mut out);
        out
    }

    pub fn trainable_param_count(&self) -> usize {
        self.params().iter().filter(|p| p.trainable).map(Parameter::numel).sum()
    }

    pub fn total_param_count(&self) -> usize {
        self.params().iter().map(Parameter::numel).sum()
    }

    pub fn zero_grad(&self) {
        for p in self.params() {
            p.value.zero_grad();
        }
    }

    fn check_boundary(&self, block: &str, t: &Tensor, expect_c: usize, expect_s: usize) -> Result<()> {
        let (_, c, h, w) = t.dims4("model")?;
        if c != expect_c || h != expect_s || w != expect_s {
            return Err(Error::shape(
                "model",
                format!("{block} produced ({c},{h},{w}), expected ({expect_c},{expect_s},{expect_s})"),
            ));
        }
        Ok(())
    }

    /// Full forward pass returning all tapped intermediates.
    pub fn forward_traced(&self, tape: &Tape, batch: &Tensor, mode: Mode) -> Result<ForwardTrace> {
        let (_, c, h, w) = batch.dims4("model")?;
        let s = self.config.input_size;
        if c != self.config.input_channels || h != s || w != s {
            return Err(Error::shape(
                "model",
                format!(
                    "input geometry ({c},{h},{w}) does not match the configured ({},{s},{s})",
                    self.config.input_channels
                ),
            ));
        }
        let trace = self.config.boundary_trace();
        let rng = &mut *self.dropout_rng.borrow_mut();

        let tap1 = self.block1.forward(tape, batch, mode, rng)?;
        self.check_boundary("block1", &tap1, trace[0].0, trace[0].1)?;
        let tap2 = self.block2.forward(tape, &tap1, mode, rng)?;
        self.check_boundary("block2", &tap2, trace[1].0, trace[1].1)?;
        let tap3 = self.block3.forward(tape, &tap2, mode, rng)?;
        self.check_boundary("block3", &tap3, trace[2].0, trace[2].1)?;
        let (block4_prepool, block4_out) = self.block4.forward_parts(tape, &tap3, mode, rng)?;
        self.check_boundary("block4", &block4_out, trace[3].0, trace[3].1)?;

        let mut features = Vec::with_capacity(4);
        for tap in [&tap1, &tap2, &tap3] {
            let t = if self.config.enable_pwfs { pwfs(tape, tap)? } else { tap.clone() };
            features.push(global_avg_pool(tape, &t)?);
        }
        features.push(global_avg_pool(tape, &block4_out)?);
        let refs: Vec<&Tensor> = features.iter().collect();
        let fused = concat_features(tape, &refs)?;
        let logits = self.classifier.forward(tape, &fused)?;
        Ok(ForwardTrace { tap1, tap2, tap3, block4_prepool, block4_out, fused, logits })
    }

    /// Logits for a batch.
    pub fn forward(&self, tape: &Tape, batch: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(self.forward_traced(tape, batch, mode)?.logits)
    }

    /// Class probabilities (softmax over logits).
    pub fn predict_probs(&self, batch: &Tensor) -> Result<Tensor> {
        let tape = Tape::inference();
        let logits = self.forward(&tape, batch, Mode::Eval)?;
        softmax(&tape, &logits)
    }

    /// Argmax class indices for a batch, eval mode.
    pub fn predict_classes(&self, batch: &Tensor) -> Result<Vec<usize>> {
        let probs = self.predict_probs(batch)?;
        let (n, k) = probs.dims2("predict")?;
        let pd = probs.data();
        Ok((0..n)
            .map(|i| {
                let row = &pd[i * k..(i + 1) * k];
                row.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).map(|(j, _)| j).unwrap()
            })
            .collect())
    }

    /// Reseeds the dropout stream (training reproducibility hook).
    pub fn reseed_dropout(&self, seed: u64) {
        *self.dropout_rng.borrow_mut() = ChaCha8Rng::seed_from_u64(seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn miniature() -> LanmsffConfig {
        LanmsffConfig {
            input_channels: 1,
            num_classes: 3,
            block_widths: [6, 12, 6, 8],
            dropout_rate: 0.1,
            input_size: 32,
            ..LanmsffConfig::default()
        }
    }

    #[test]
    fn default_fusion_length_is_156() {
        let cfg = LanmsffConfig::default();
        assert_eq!(cfg.fusion_length(), 156);
        assert_eq!(cfg.fusion_length(), 22 + 24 + 26 + 84);
    }

    #[test]
    fn disabling_pwfs_lengthens_fusion_to_300() {
        let cfg = LanmsffConfig { enable_pwfs: false, ..LanmsffConfig::default() };
        assert_eq!(cfg.fusion_length(), 300);
    }

    #[test]
    fn classifier_shape_follows_fusion_length() {
        let model = Model::build(&LanmsffConfig::default(), 1).unwrap();
        assert_eq!(model.classifier.weight.shape(), &[7, 156]);
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let cfg = miniature();
        let a = Model::build(&cfg, 42).unwrap();
        let b = Model::build(&cfg, 42).unwrap();
        let c = Model::build(&cfg, 43).unwrap();
        let pa = a.params();
        let pb = b.params();
        let pc = c.params();
        assert!(pa.iter().zip(&pb).all(|(x, y)| x.value.to_vec() == y.value.to_vec()));
        assert!(pa.iter().zip(&pc).any(|(x, y)| x.value.to_vec() != y.value.to_vec()));
    }

    #[test]
    fn invalid_configs_name_the_violated_constraint() {
        let bad = LanmsffConfig { block_widths: [66, 70, 78, 84], ..LanmsffConfig::default() };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("width2=70"), "{msg}");

        let bad = LanmsffConfig { block_widths: [64, 72, 78, 84], ..LanmsffConfig::default() };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("divisible by 3"), "{msg}");
    }

    #[test]
    fn forward_shapes_and_probability_rows() {
        let model = Model::build(&miniature(), 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::uniform(&[2, 1, 32, 32], 0.0, 1.0, &mut rng);
        let tape = Tape::inference();
        let logits = model.forward(&tape, &x, Mode::Eval).unwrap();
        assert_eq!(logits.shape(), &[2, 3]);
        let probs = model.predict_probs(&x).unwrap();
        let pd = probs.data();
        for row in pd.chunks(3) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn eval_forward_is_deterministic_across_calls() {
        let model = Model::build(&miniature(), 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Tensor::uniform(&[1, 1, 32, 32], 0.0, 1.0, &mut rng);
        let a = model.predict_probs(&x).unwrap().to_vec();
        let b = model.predict_probs(&x).unwrap().to_vec();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_input_geometry_rejected() {
        let model = Model::build(&miniature(), 11).unwrap();
        let tape = Tape::inference();
        let x = Tensor::zeros(&[1, 1, 16, 16]);
        assert!(model.forward(&tape, &x, Mode::Eval).is_err());
        let x = Tensor::zeros(&[1, 3, 32, 32]);
        assert!(model.forward(&tape, &x, Mode::Eval).is_err());
    }
}
