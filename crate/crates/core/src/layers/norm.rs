//! Batch normalization over the channel axis of NCHW tensors.

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tape, Tensor};

use super::Mode;

/// Per-channel batch normalization.
///
/// Training mode normalizes with biased batch statistics and updates the
/// running estimates as `running = momentum * running + (1 - momentum) * batch`.
/// Eval mode depends only on the running statistics, so it is deterministic.
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNorm {
    pub const DEFAULT_EPSILON: f64 = 1e-5;
    pub const DEFAULT_MOMENTUM: f64 = 0.9;

    pub fn new(channels: usize) -> Self {
        BatchNorm {
            gamma: Tensor::full(&[channels], 1.0).requires_grad(),
            beta: Tensor::zeros(&[channels]).requires_grad(),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            momentum: Self::DEFAULT_MOMENTUM,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4("batch_norm")?;
        if c != self.channels() {
            return Err(Error::shape(
                "batch_norm",
                format!("input has {} channels, layer has {}", c, self.channels()),
            ));
        }
        let plane = h * w;
        let m = (n * plane) as f64;

        // Per-channel statistics for this pass: batch stats in training,
        // running stats in eval.
        let (mean, var) = match mode {
            Mode::Train => {
                let xd = x.data();
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ni in 0..n {
                    for ci in 0..c {
                        let s: f64 = xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane].iter().sum();
                        mean[ci] += s;
                    }
                }
                for v in mean.iter_mut() {
                    *v /= m;
                }
                for ni in 0..n {
                    for ci in 0..c {
                        let mu = mean[ci];
                        let s: f64 = xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane]
                            .iter()
                            .map(|&v| (v - mu) * (v - mu))
                            .sum();
                        var[ci] += s;
                    }
                }
                for v in var.iter_mut() {
                    *v /= m;
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean.to_vec(), self.running_var.to_vec()),
        };

        if mode == Mode::Train {
            let mut rm = self.running_mean.data_mut();
            let mut rv = self.running_var.data_mut();
            for ci in 0..c {
                rm[ci] = self.momentum * rm[ci] + (1.0 - self.momentum) * mean[ci];
                rv[ci] = self.momentum * rv[ci] + (1.0 - self.momentum) * var[ci];
            }
        }

        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut xhat = vec![0.0; n * c * plane];
        {
            let xd = x.data();
            for ni in 0..n {
                for ci in 0..c {
                    let (mu, is) = (mean[ci], inv_std[ci]);
                    let src = &xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    let dst = &mut xhat[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = (s - mu) * is;
                    }
                }
            }
        }
        let mut out = vec![0.0; n * c * plane];
        {
            let g = self.gamma.data();
            let b = self.beta.data();
            for ni in 0..n {
                for ci in 0..c {
                    let (gv, bv) = (g[ci], b[ci]);
                    let src = &xhat[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    let dst = &mut out[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = gv * s + bv;
                    }
                }
            }
        }

        let shape = [n, c, h, w];
        let train = mode == Mode::Train;
        let gamma = self.gamma.clone();
        tape.record(
            "batch_norm",
            &[x, &self.gamma, &self.beta],
            move || Tensor::new(&shape, out),
            move |og, needs| {
                let g = gamma.data();
                let ggamma = needs[1].then(|| {
                    let mut gg = vec![0.0; c];
                    for ni in 0..n {
                        for ci in 0..c {
                            let o = &og[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                            let xh = &xhat[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                            gg[ci] += o.iter().zip(xh).map(|(&a, &b)| a * b).sum::<f64>();
                        }
                    }
                    gg
                });
                let gbeta = needs[2].then(|| {
                    let mut gb = vec![0.0; c];
                    for ni in 0..n {
                        for ci in 0..c {
                            gb[ci] += og[(ni * c + ci) * plane..(ni * c + ci + 1) * plane].iter().sum::<f64>();
                        }
                    }
                    gb
                });
                let gx = needs[0].then(|| {
                    let mut gx = vec![0.0; n * c * plane];
                    if train {
                        // Full batch-statistics backward: the mean and
                        // variance depend on x, so their derivatives feed
                        // back into every element of the channel.
                        let mut sum_dy = vec![0.0; c];
                        let mut sum_dy_xhat = vec![0.0; c];
                        for ni in 0..n {
                            for ci in 0..c {
                                let o = &og[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                let xh = &xhat[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                sum_dy[ci] += o.iter().sum::<f64>();
                                sum_dy_xhat[ci] += o.iter().zip(xh).map(|(&a, &b)| a * b).sum::<f64>();
                            }
                        }
                        for ni in 0..n {
                            for ci in 0..c {
                                let coeff = g[ci] * inv_std[ci];
                                let o = &og[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                let xh = &xhat[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                let dst = &mut gx[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                for ((d, &dy), &xhv) in dst.iter_mut().zip(o).zip(xh) {
                                    *d = coeff * (dy - sum_dy[ci] / m - xhv * sum_dy_xhat[ci] / m);
                                }
                            }
                        }
                    } else {
                        // Running statistics are constants here.
                        for ni in 0..n {
                            for ci in 0..c {
                                let coeff = g[ci] * inv_std[ci];
                                let o = &og[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                let dst = &mut gx[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                                for (d, &dy) in dst.iter_mut().zip(o) {
                                    *d = coeff * dy;
                                }
                            }
                        }
                    }
                    gx
                });
                vec![gx, ggamma, gbeta]
            },
        )
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<Parameter>) {
        out.push(Parameter { name: format!("{prefix}.gamma"), value: self.gamma.clone(), trainable: true });
        out.push(Parameter { name: format!("{prefix}.beta"), value: self.beta.clone(), trainable: true });
        out.push(Parameter::frozen(format!("{prefix}.running_mean"), self.running_mean.clone()));
        out.push(Parameter::frozen(format!("{prefix}.running_var"), self.running_var.clone()));
    }
}
