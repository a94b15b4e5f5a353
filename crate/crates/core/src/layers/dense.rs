//! Fully connected layer over (N, features) tensors.

use rand::Rng;

use crate::error::Result;
use crate::tensor::ops::linear;
use crate::tensor::{Parameter, Tape, Tensor};

/// Affine layer with weights stored as `(out, in)` rows.
pub struct Dense {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Dense {
    pub fn new<R: Rng>(in_features: usize, out_features: usize, bias: bool, rng: &mut R) -> Self {
        let bound = (6.0 / in_features as f64).sqrt();
        let weight = Tensor::uniform(&[out_features, in_features], -bound, bound, rng).requires_grad();
        let bias = bias.then(|| Tensor::zeros(&[out_features]).requires_grad());
        Dense { weight, bias }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        linear(tape, x, &self.weight, self.bias.as_ref())
    }

    pub fn param_count(&self) -> usize {
        self.weight.numel() + self.bias.as_ref().map_or(0, Tensor::numel)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<Parameter>) {
        out.push(Parameter { name: format!("{prefix}.weight"), value: self.weight.clone(), trainable: true });
        if let Some(b) = &self.bias {
            out.push(Parameter { name: format!("{prefix}.bias"), value: b.clone(), trainable: true });
        }
    }
}
