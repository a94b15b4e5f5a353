//! The joint channel/spatial attention block.
//!
//! Two parallel paths read the same feature map. The channel path condenses
//! each channel to its global average and passes the descriptor through a
//! bottleneck MLP (reduction factor 4). The spatial path averages across
//! channels into a single-plane descriptor, compresses it with two stride-2
//! convolutions and restores the original extent with two stride-2 transposed
//! convolutions. The two maps multiply (broadcast) and a single sigmoid
//! rescales the product into (0, 1).

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{Conv2d, ConvSpec, Dense, TransposedConv2d};
use crate::tensor::ops::{mul, relu, reshape, sigmoid};
use crate::tensor::{Parameter, Tape, Tensor};

/// Bottleneck reduction factor of the channel MLP.
pub const CHANNEL_REDUCTION: usize = 4;

pub struct MassAtt {
    pub channel_reduce: Dense,
    pub channel_expand: Dense,
    pub spatial_down1: Conv2d,
    pub spatial_down2: Conv2d,
    pub spatial_up1: TransposedConv2d,
    pub spatial_up2: TransposedConv2d,
}

impl MassAtt {
    pub fn new<R: Rng>(channels: usize, rng: &mut R) -> Result<Self> {
        if channels == 0 || !channels.is_multiple_of(CHANNEL_REDUCTION) {
            return Err(Error::InvalidConfig(format!(
                "attention channel count {channels} must be a positive multiple of {CHANNEL_REDUCTION}"
            )));
        }
        let hidden = channels / CHANNEL_REDUCTION;
        Ok(MassAtt {
            channel_reduce: Dense::new(channels, hidden, true, rng),
            channel_expand: Dense::new(hidden, channels, true, rng),
            spatial_down1: Conv2d::new(ConvSpec::k3(1, 2).with_stride(2), rng)?,
            spatial_down2: Conv2d::new(ConvSpec::k3(2, 4).with_stride(2), rng)?,
            spatial_up1: TransposedConv2d::new(4, 4, (3, 3), (2, 2), true, rng),
            spatial_up2: TransposedConv2d::new(4, 1, (3, 3), (2, 2), true, rng),
        })
    }

    pub fn channels(&self) -> usize {
        self.channel_expand.weight.shape()[0]
    }

    /// Produces the attention map, same shape as the input, every entry
    /// strictly inside (0, 1).
    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4("mass_att")?;
        if c != self.channels() {
            return Err(Error::shape("mass_att", format!("input has {} channels, block has {}", c, self.channels())));
        }
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::shape(
                "mass_att",
                format!("spatial extents {}x{} must be divisible by 4 for the stride-2 round trip", h, w),
            ));
        }

        // channel path: global average descriptor -> bottleneck MLP
        let d_c = crate::layers::global_avg_pool(tape, x)?; // (N, C)
        let hidden = relu(tape, &self.channel_reduce.forward(tape, &d_c)?)?;
        let a_c = self.channel_expand.forward(tape, &hidden)?; // (N, C)
        let a_c = reshape(tape, &a_c, &[n, c, 1, 1])?;

        // spatial path: cross-channel mean -> compress -> expand
        let d_s = channel_mean(tape, x)?; // (N, 1, H, W)
        let t = relu(tape, &self.spatial_down1.forward(tape, &d_s)?)?; // (N, 2, H/2, W/2)
        let t = relu(tape, &self.spatial_down2.forward(tape, &t)?)?; // (N, 4, H/4, W/4)
        let t = relu(tape, &self.spatial_up1.forward(tape, &t, Some((h / 2, w / 2)))?)?;
        let a_s = self.spatial_up2.forward(tape, &t, Some((h, w)))?; // (N, 1, H, W)

        let joint = mul(tape, &a_c, &a_s)?; // broadcast to (N, C, H, W)
        sigmoid(tape, &joint)
    }

    pub fn param_count(&self) -> usize {
        let mut v = Vec::new();
        self.collect_params("", &mut v);
        v.iter().map(Parameter::numel).sum()
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<Parameter>) {
        self.channel_reduce.collect_params(&format!("{prefix}.channel_reduce"), out);
        self.channel_expand.collect_params(&format!("{prefix}.channel_expand"), out);
        self.spatial_down1.collect_params(&format!("{prefix}.spatial_down1"), out);
        self.spatial_down2.collect_params(&format!("{prefix}.spatial_down2"), out);
        self.spatial_up1.collect_params(&format!("{prefix}.spatial_up1"), out);
        self.spatial_up2.collect_params(&format!("{prefix}.spatial_up2"), out);
    }
}

/// Mean across the channel axis: `(N, C, H, W) -> (N, 1, H, W)`.
fn channel_mean(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4("channel_mean")?;
    let plane = h * w;
    let mut out = vec![0.0; n * plane];
    {
        let xd = x.data();
        for ni in 0..n {
            let dst = &mut out[ni * plane..(ni + 1) * plane];
            for ci in 0..c {
                let src = &xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            for d in dst.iter_mut() {
                *d /= c as f64;
            }
        }
    }
    tape.record("channel_mean", &[x], move || Tensor::new(&[n, 1, h, w], out), move |og, needs| {
        vec![needs[0].then(|| {
            let mut gx = vec![0.0; n * c * plane];
            for ni in 0..n {
                let src = &og[ni * plane..(ni + 1) * plane];
                for ci in 0..c {
                    let dst = &mut gx[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = s / c as f64;
                    }
                }
            }
            gx
        })]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_shapes_follow_the_annotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let att = MassAtt::new(72, &mut rng).unwrap();
        assert_eq!(att.channel_reduce.weight.shape(), &[18, 72]);
        assert_eq!(att.channel_expand.weight.shape(), &[72, 18]);
        assert_eq!(att.spatial_down1.weight.shape(), &[2, 1, 3, 3]);
        assert_eq!(att.spatial_down2.weight.shape(), &[4, 2, 3, 3]);
        assert_eq!(att.spatial_up1.weight.shape(), &[4, 4, 3, 3]);
        assert_eq!(att.spatial_up2.weight.shape(), &[1, 4, 3, 3]);

        let att84 = MassAtt::new(84, &mut rng).unwrap();
        assert_eq!(att84.channel_reduce.weight.shape(), &[21, 84]);
        assert_eq!(att84.channel_expand.weight.shape(), &[84, 21]);
    }

    #[test]
    fn rejects_channels_not_divisible_by_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        assert!(MassAtt::new(70, &mut rng).is_err());
    }

    #[test]
    fn output_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let att = MassAtt::new(8, &mut rng).unwrap();
        let tape = Tape::inference();
        let x = Tensor::uniform(&[2, 8, 8, 8], -2.0, 2.0, &mut rng);
        let m = att.forward(&tape, &x).unwrap();
        assert_eq!(m.shape(), &[2, 8, 8, 8]);
        for &v in m.data().iter() {
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn zero_input_with_zero_biases_gives_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let att = MassAtt::new(8, &mut rng).unwrap();
        let tape = Tape::inference();
        let x = Tensor::zeros(&[1, 8, 8, 8]);
        let m = att.forward(&tape, &x).unwrap();
        for &v in m.data().iter() {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn spatial_divisibility_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let att = MassAtt::new(8, &mut rng).unwrap();
        let tape = Tape::inference();
        let x = Tensor::zeros(&[1, 8, 6, 8]);
        assert!(att.forward(&tape, &x).is_err());
    }

    #[test]
    fn parameter_count_at_width_72() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let att = MassAtt::new(72, &mut rng).unwrap();
        // MLP: 72*18+18 + 18*72+72; spatial: 18+2 + 72+4 + 144+4 + 36+1
        assert_eq!(att.param_count(), 2682 + 281);
    }

    #[test]
    fn gradients_match_finite_differences_at_miniature_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let x = Tensor::uniform(&[1, 4, 4, 4], -1.0, 1.0, &mut rng);
        let f = move |tape: &Tape, xs: &[Tensor]| {
            let mut r = ChaCha8Rng::seed_from_u64(48);
            let att = MassAtt::new(4, &mut r).unwrap();
            let m = att.forward(tape, &xs[0])?;
            crate::tensor::ops::sum_all(tape, &m)
        };
        let rep = crate::tensor::check_gradients(&f, &[x], 1e-5, 1e-4).unwrap();
        assert!(rep.pass, "max_rel_err {}", rep.max_rel_err);
    }
}
