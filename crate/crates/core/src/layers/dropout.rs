//! Inverted dropout: surviving activations are scaled by `1/(1-rate)` during
//! training so that eval mode is exactly the identity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

use super::Mode;

#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!("dropout rate must be in [0,1), got {rate}")));
        }
        Ok(Dropout { rate })
    }

    /// Eval mode (or rate 0) returns the input handle untouched; train mode
    /// draws one Bernoulli mask per call from `rng`.
    pub fn forward(&self, tape: &Tape, x: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if mode == Mode::Eval || self.rate == 0.0 {
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..x.numel()).map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 }).collect();
        let data: Vec<f64> = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let shape = x.shape().to_vec();
        tape.record("dropout", &[x], move || Tensor::new(&shape, data), move |og, needs| {
            vec![needs[0].then(|| og.iter().zip(&mask).map(|(&g, &m)| g * m).collect())]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn eval_mode_is_identity() {
        let tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::new(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = Dropout::new(0.5).unwrap();
        let y = d.forward(&tape, &x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y.id(), x.id());
        assert_eq!(tape.len(), 0);
    }

    #[test]
    fn invalid_rate_rejected() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
        assert!(Dropout::new(0.0).is_ok());
    }

    #[test]
    fn train_mode_preserves_expectation() {
        // E[dropout(x)] = x with inverted scaling: sample mean over many draws
        // must sit within 3 sigma of the input value.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = Dropout::new(0.25).unwrap();
        let x = Tensor::full(&[100], 1.0);
        let tape = Tape::inference();
        let draws = 200; // 20_000 masked values in total
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..draws {
            let y = d.forward(&tape, &x, Mode::Train, &mut rng).unwrap();
            sum += y.data().iter().sum::<f64>();
            count += y.numel();
        }
        let mean = sum / count as f64;
        // one masked value has variance p/(1-p) = 1/3
        let sigma = (1.0f64 / 3.0 / count as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}, sigma {sigma}");
    }

    #[test]
    fn train_mode_values_are_scaled_or_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Dropout::new(0.25).unwrap();
        let x = Tensor::full(&[64], 3.0);
        let tape = Tape::inference();
        let y = d.forward(&tape, &x, Mode::Train, &mut rng).unwrap();
        for &v in y.data().iter() {
            assert!(v == 0.0 || (v - 4.0).abs() < 1e-12);
        }
    }
}
