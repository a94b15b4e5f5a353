//! Stem block (blocks 1 and 3): three 3x3 convolutions with the middle one
//! depthwise-separable, then batch norm, 2x2 max pooling and dropout. Output
//! channels equal the block width; spatial extent halves.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::{maxpool2x2, relu, BatchNorm, Conv2d, ConvSpec, Dropout, DwsConv2d, Mode};
use crate::tensor::{Parameter, Tape, Tensor};

pub struct StemBlock {
    pub conv1: Conv2d,
    pub dws: DwsConv2d,
    pub conv3: Conv2d,
    pub bn: BatchNorm,
    pub dropout: Dropout,
}

impl StemBlock {
    pub fn new<R: Rng>(in_channels: usize, width: usize, dropout_rate: f64, rng: &mut R) -> Result<Self> {
        Ok(StemBlock {
            conv1: Conv2d::new(ConvSpec::k3(in_channels, width), rng)?,
            dws: DwsConv2d::new(width, width, 1, true, rng)?,
            // the last convolution feeds straight into batch norm, so its
            // bias would be redundant
            conv3: Conv2d::new(ConvSpec::k3(width, width).no_bias(), rng)?,
            bn: BatchNorm::new(width),
            dropout: Dropout::new(dropout_rate)?,
        })
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let y = relu(tape, &self.conv1.forward(tape, x)?)?;
        let y = relu(tape, &self.dws.forward(tape, &y)?)?;
        let y = relu(tape, &self.conv3.forward(tape, &y)?)?;
        let y = self.bn.forward(tape, &y, mode)?;
        let y = maxpool2x2(tape, &y)?;
        self.dropout.forward(tape, &y, mode, rng)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<Parameter>) {
        self.conv1.collect_params(&format!("{prefix}.conv1"), out);
        self.dws.collect_params(&format!("{prefix}.dws"), out);
        self.conv3.collect_params(&format!("{prefix}.conv3"), out);
        self.bn.collect_params(&format!("{prefix}.bn"), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn block1_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let block = StemBlock::new(1, 66, 0.25, &mut rng).unwrap();
        let tape = Tape::inference();
        let x = Tensor::zeros(&[1, 1, 64, 64]);
        let mut drop_rng = ChaCha8Rng::seed_from_u64(0);
        let y = block.forward(&tape, &x, Mode::Eval, &mut drop_rng).unwrap();
        assert_eq!(y.shape(), &[1, 66, 32, 32]);
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let block = StemBlock::new(1, 6, 0.25, &mut rng).unwrap();
        let tape = Tape::inference();
        let x = Tensor::uniform(&[2, 1, 8, 8], 0.0, 1.0, &mut rng);
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let y1 = block.forward(&tape, &x, Mode::Eval, &mut r1).unwrap();
        let y2 = block.forward(&tape, &x, Mode::Eval, &mut r2).unwrap();
        assert_eq!(y1.to_vec(), y2.to_vec());
    }

    #[test]
    fn miniature_stem_gradient_check() {
        let x = {
            let mut rng = ChaCha8Rng::seed_from_u64(53);
            Tensor::uniform(&[1, 1, 6, 6], 0.0, 1.0, &mut rng)
        };
        let f = |tape: &Tape, xs: &[Tensor]| {
            let mut rng = ChaCha8Rng::seed_from_u64(54);
            let block = StemBlock::new(1, 6, 0.0, &mut rng).unwrap();
            let mut drop_rng = ChaCha8Rng::seed_from_u64(0);
            let y = block.forward(tape, &xs[0], Mode::Train, &mut drop_rng)?;
            crate::tensor::ops::sum_all(tape, &y)
        };
        let rep = crate::tensor::check_gradients(&f, &[x], 1e-5, 1e-4).unwrap();
        assert!(rep.pass, "max_rel_err {}", rep.max_rel_err);
    }
}
