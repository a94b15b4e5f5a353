//! Dual-path group block (blocks 2 and 4).
//!
//! The input is shuffle-split into two channel groups feeding two parallel
//! three-stage convolution paths: one plain 3x3, one dilation-2 3x3, with the
//! middle stage depthwise-separable in both. After the final concatenation the
//! attention block reweights features, then a 1x1 projection, batch norm,
//! 2x2 max pooling and dropout close the block.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{concat_channels, maxpool2x2, relu, BatchNorm, Conv2d, ConvSpec, Dropout, DwsConv2d, Mode};
use crate::tensor::ops::mul;
use crate::tensor::{Parameter, Tape, Tensor};

use super::MassAtt;

/// How the two paths see each other's features between stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathWiring {
    /// Stage outputs are concatenated after every stage and the concatenation
    /// feeds both paths' next stage.
    #[default]
    Shared,
    /// Paths stay independent until the final concatenation.
    Independent,
}

pub struct DualPathBlock {
    pub width: usize,
    pub wiring: PathWiring,
    pub stage1_plain: Conv2d,
    pub stage1_dilated: Conv2d,
    pub stage2_plain: DwsConv2d,
    pub stage2_dilated: DwsConv2d,
    pub stage3_plain: Conv2d,
    pub stage3_dilated: Conv2d,
    pub attention: Option<MassAtt>,
    pub proj: Conv2d,
    pub bn: BatchNorm,
    pub dropout: Dropout,
}

impl DualPathBlock {
    pub fn new<R: Rng>(
        in_channels: usize,
        width: usize,
        wiring: PathWiring,
        with_attention: bool,
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !in_channels.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "dual-path block input channels {in_channels} must be even for the shuffle split"
            )));
        }
        if !width.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("dual-path block width {width} must be even")));
        }
        let half_in = in_channels / 2;
        let half = width / 2;
        // stages 2 and 3 consume either the full concatenation or their own
        // path's output, depending on the wiring
        let mid_in = match wiring {
            PathWiring::Shared => width,
            PathWiring::Independent => half,
        };
        // path convolutions carry no biases; batch norm closes the block
        let attention = with_attention.then(|| MassAtt::new(width, rng)).transpose()?;
        Ok(DualPathBlock {
            width,
            wiring,
            stage1_plain: Conv2d::new(ConvSpec::k3(half_in, half).no_bias(), rng)?,
            stage1_dilated: Conv2d::new(ConvSpec::k3(half_in, half).with_dilation(2).no_bias(), rng)?,
            stage2_plain: DwsConv2d::new(mid_in, half, 1, false, rng)?,
            stage2_dilated: DwsConv2d::new(mid_in, half, 2, false, rng)?,
            stage3_plain: Conv2d::new(ConvSpec::k3(mid_in, half).no_bias(), rng)?,
            stage3_dilated: Conv2d::new(ConvSpec::k3(mid_in, half).with_dilation(2).no_bias(), rng)?,
            attention,
            proj: Conv2d::new(ConvSpec::k1(width, width).no_bias(), rng)?,
            bn: BatchNorm::new(width),
            dropout: Dropout::new(dropout_rate)?,
        })
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        Ok(self.forward_parts(tape, x, mode, rng)?.1)
    }

    /// Forward pass that also exposes the pre-pooling feature map (the
    /// Grad-CAM tap for block 4).
    pub fn forward_parts(&self, tape: &Tape, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<(Tensor, Tensor)> {
        let (group_a, group_b) = crate::layers::channel_shuffle_split(tape, x)?;
        let s1a = relu(tape, &self.stage1_plain.forward(tape, &group_a)?)?;
        let s1b = relu(tape, &self.stage1_dilated.forward(tape, &group_b)?)?;
        let (s3a, s3b) = match self.wiring {
            PathWiring::Shared => {
                let cat1 = concat_channels(tape, &[&s1a, &s1b])?;
                let s2a = relu(tape, &self.stage2_plain.forward(tape, &cat1)?)?;
                let s2b = relu(tape, &self.stage2_dilated.forward(tape, &cat1)?)?;
                let cat2 = concat_channels(tape, &[&s2a, &s2b])?;
                let s3a = relu(tape, &self.stage3_plain.forward(tape, &cat2)?)?;
                let s3b = relu(tape, &self.stage3_dilated.forward(tape, &cat2)?)?;
                (s3a, s3b)
            }
            PathWiring::Independent => {
                let s2a = relu(tape, &self.stage2_plain.forward(tape, &s1a)?)?;
                let s2b = relu(tape, &self.stage2_dilated.forward(tape, &s1b)?)?;
                let s3a = relu(tape, &self.stage3_plain.forward(tape, &s2a)?)?;
                let s3b = relu(tape, &self.stage3_dilated.forward(tape, &s2b)?)?;
                (s3a, s3b)
            }
        };
        let fused = concat_channels(tape, &[&s3a, &s3b])?;
        let weighted = match &self.attention {
            Some(att) => {
                let map = att.forward(tape, &fused)?;
                mul(tape, &fused, &map)?
            }
            None => fused,
        };
        let y = relu(tape, &self.proj.forward(tape, &weighted)?)?;
        let prepool = self.bn.forward(tape, &y, mode)?;
        let y = maxpool2x2(tape, &prepool)?;
        let out = self.dropout.forward(tape, &y, mode, rng)?;
        Ok((prepool, out))
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<Parameter>) {
        self.stage1_plain.collect_params(&format!("{prefix}.stage1_plain"), out);
        self.stage1_dilated.collect_params(&format!("{prefix}.stage1_dilated"), out);
        self.stage2_plain.collect_params(&format!("{prefix}.stage2_plain"), out);
        self.stage2_dilated.collect_params(&format!("{prefix}.stage2_dilated"), out);
        self.stage3_plain.collect_params(&format!("{prefix}.stage3_plain"), out);
        self.stage3_dilated.collect_params(&format!("{prefix}.stage3_dilated"), out);
        if let Some(att) = &self.attention {
            att.collect_params(&format!("{prefix}.attention"), out);
        }
        self.proj.collect_params(&format!("{prefix}.proj"), out);
        self.bn.collect_params(&format!("{prefix}.bn"), out);
    }
}
