//! Categorical cross-entropy, computed from logits through log-sum-exp so the
//! probabilities named in the loss never materialize at degenerate precision.

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

/// Mean over the batch of `-log softmax(logits)[true class]`, with `targets`
/// one-hot. The gradient with respect to the logits is
/// `(softmax(logits) - targets) / N`.
pub fn cross_entropy(tape: &Tape, logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let (n, k) = logits.dims2("cross_entropy")?;
    let (tn, tk) = targets.dims2("cross_entropy")?;
    if (n, k) != (tn, tk) {
        return Err(Error::shape(
            "cross_entropy",
            format!("logits {:?} vs labels {:?}", logits.shape(), targets.shape()),
        ));
    }
    {
        let td = targets.data();
        for (row_idx, row) in td.chunks(k).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&v| v < 0.0) {
                return Err(Error::data(format!("label row {row_idx} is not one-hot (sum {sum})")));
            }
        }
    }

    let mut softmax = vec![0.0; n * k];
    let mut loss = 0.0;
    {
        let zd = logits.data();
        let td = targets.data();
        for i in 0..n {
            let row = &zd[i * k..(i + 1) * k];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - m).exp();
                softmax[i * k + j] = e;
                z += e;
            }
            for v in &mut softmax[i * k..(i + 1) * k] {
                *v /= z;
            }
            let lse = m + z.ln();
            let picked: f64 = row.iter().zip(&td[i * k..(i + 1) * k]).map(|(&zv, &tv)| zv * tv).sum();
            loss += lse - picked;
        }
        loss /= n as f64;
    }

    let targets_c = targets.clone();
    let logits_c = logits.clone();
    tape.record("cross_entropy", &[logits, targets], move || Ok(Tensor::scalar(loss)), move |og, needs| {
        let g = og[0];
        let gl = needs[0].then(|| {
            let td = targets_c.data();
            softmax.iter().zip(td.iter()).map(|(&p, &t)| g * (p - t) / n as f64).collect()
        });
        let gt = needs[1].then(|| {
            // d loss / d target = -logit / N  (targets are data, this path is
            // exercised only by gradient checks)
            logits_c.data().iter().map(|&z| -g * z / n as f64).collect()
        });
        vec![gl, gt]
    })
}

/// One-hot matrix for a slice of class indices.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::data(format!("label {l} outside the {num_classes}-class schema")));
        }
        data[i * num_classes + l] = 1.0;
    }
    Tensor::new(&[labels.len(), num_classes], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let tape = Tape::inference();
        let logits = Tensor::new(&[1, 3], vec![1000.0, 0.0, 0.0]).unwrap();
        let t = one_hot(&[0], 3).unwrap();
        let loss = cross_entropy(&tape, &logits, &t).unwrap();
        assert_eq!(loss.item(), 0.0);
    }

    #[test]
    fn uniform_prediction_over_seven_classes() {
        let tape = Tape::inference();
        let logits = Tensor::zeros(&[2, 7]);
        let t = one_hot(&[3, 5], 7).unwrap();
        let loss = cross_entropy(&tape, &logits, &t).unwrap();
        assert!((loss.item() - (7.0f64).ln()).abs() < 1e-12);
        assert!((loss.item() - 1.9459).abs() < 1e-4);
    }

    #[test]
    fn zero_label_row_rejected() {
        let tape = Tape::inference();
        let logits = Tensor::zeros(&[1, 3]);
        let t = Tensor::zeros(&[1, 3]);
        assert!(cross_entropy(&tape, &logits, &t).is_err());
    }

    #[test]
    fn gradient_is_softmax_minus_onehot_over_n() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        let tape = Tape::new();
        let logits = Tensor::uniform(&[4, 5], -2.0, 2.0, &mut rng).requires_grad();
        let t = one_hot(&[1, 0, 4, 2], 5).unwrap();
        let loss = cross_entropy(&tape, &logits, &t).unwrap();
        tape.backward(&loss).unwrap();
        let g = logits.grad().unwrap();

        let probs_tape = Tape::inference();
        let probs = crate::layers::softmax(&probs_tape, &logits).unwrap();
        let pd = probs.data();
        let td = t.data();
        for i in 0..20 {
            let expect = (pd[i] - td[i]) / 4.0;
            assert!((g[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(72);
        let t = one_hot(&[2, 0, 1], 4).unwrap();
        let f = move |tape: &Tape, xs: &[Tensor]| cross_entropy(tape, &xs[0], &t);
        let logits = Tensor::uniform(&[3, 4], -2.0, 2.0, &mut rng);
        let rep = crate::tensor::check_gradients(&f, &[logits], 1e-5, 1e-4).unwrap();
        assert!(rep.pass, "max_rel_err {}", rep.max_rel_err);
    }
}
