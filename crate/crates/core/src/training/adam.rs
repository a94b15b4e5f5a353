//! Adam with standard bias correction, updating trainable parameters in
//! place between passes.

use crate::error::{Error, Result};
use crate::tensor::Parameter;

use super::TrainConfig;

/// Per-parameter first/second moment estimates plus the step counter.
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    /// Moments aligned with the trainable parameters of `params`, in order.
    pub fn new(params: &[Parameter]) -> Self {
        let sizes: Vec<usize> = params.iter().filter(|p| p.trainable).map(Parameter::numel).collect();
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// One update: `m_hat = m/(1-b1^t)`, `v_hat = v/(1-b2^t)`,
/// `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
///
/// Parameters without an accumulated gradient are treated as zero-gradient.
/// A NaN gradient aborts the whole step (no parameter is touched) and names
/// the offender.
pub fn adam_step(params: &[Parameter], state: &mut AdamState, cfg: &TrainConfig, lr: f64) -> Result<()> {
    let trainable: Vec<&Parameter> = params.iter().filter(|p| p.trainable).collect();
    if trainable.len() != state.m.len() {
        return Err(Error::InvalidConfig(format!(
            "optimizer state holds {} parameters, model has {} trainable",
            state.m.len(),
            trainable.len()
        )));
    }
    let grads: Vec<Option<Vec<f64>>> = trainable.iter().map(|p| p.value.grad()).collect();
    for (p, g) in trainable.iter().zip(&grads) {
        if let Some(g) = g {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NanGradient(p.name.clone()));
            }
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in trainable.iter().zip(&grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let zero;
        let g: &[f64] = match g {
            Some(g) => g,
            None => {
                zero = vec![0.0; p.numel()];
                &zero
            }
        };
        let mut theta = p.value.data_mut();
        for i in 0..g.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn param(name: &str, data: Vec<f64>) -> Parameter {
        Parameter::new(name, Tensor::new(&[data.len()], data).unwrap())
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let p = param("w", vec![1.0, -2.0, 3.0]);
        let params = vec![p];
        let mut state = AdamState::new(&params);
        adam_step(&params, &mut state, &TrainConfig::default(), 0.001).unwrap();
        assert_eq!(params[0].value.to_vec(), vec![1.0, -2.0, 3.0]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        // with g=1 at t=1: m_hat = 1, v_hat = 1, so the step is
        // lr / (1 + eps) ~ lr
        let p = param("w", vec![0.0]);
        p.value.accumulate_grad(&[1.0]);
        let params = vec![p];
        let mut state = AdamState::new(&params);
        adam_step(&params, &mut state, &TrainConfig::default(), 0.001).unwrap();
        let moved = -params[0].value.to_vec()[0];
        assert!((moved - 0.001).abs() < 1e-6, "moved {moved}");
    }

    #[test]
    fn nan_gradient_aborts_and_names_the_parameter() {
        let p = param("block1.conv1.weight", vec![1.0]);
        p.value.accumulate_grad(&[f64::NAN]);
        let params = vec![p];
        let mut state = AdamState::new(&params);
        let err = adam_step(&params, &mut state, &TrainConfig::default(), 0.001).unwrap_err();
        assert!(err.to_string().contains("block1.conv1.weight"), "{err}");
        assert_eq!(params[0].value.to_vec(), vec![1.0]);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn converges_on_a_quadratic() {
        // minimize f(theta) = theta^2 from theta = 1
        let p = param("theta", vec![1.0]);
        let params = vec![p];
        let mut state = AdamState::new(&params);
        let cfg = TrainConfig::default();
        for _ in 0..200 {
            let theta = params[0].value.to_vec()[0];
            params[0].value.zero_grad();
            params[0].value.accumulate_grad(&[2.0 * theta]);
            adam_step(&params, &mut state, &cfg, 0.05).unwrap();
        }
        let theta = params[0].value.to_vec()[0];
        assert!(theta.abs() < 0.05, "theta {theta}");
    }

    #[test]
    fn update_magnitude_is_bounded_per_coordinate() {
        // |step| <= lr * (1-beta1)/sqrt(1-beta2), the classical bound for
        // beta1^2 > beta2 regimes; about 3.16*lr for the default moments
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(81);
        let p = param("w", vec![0.0; 32]);
        let params = vec![p];
        let mut state = AdamState::new(&params);
        let cfg = TrainConfig::default();
        let lr = 0.01;
        let bound = lr * (1.0 - cfg.beta1) / (1.0 - cfg.beta2).sqrt() + 1e-12;
        let mut prev = params[0].value.to_vec();
        for _ in 0..50 {
            params[0].value.zero_grad();
            let g: Vec<f64> = (0..32).map(|_| rng.gen_range(-5.0..5.0)).collect();
            params[0].value.accumulate_grad(&g);
            adam_step(&params, &mut state, &cfg, lr).unwrap();
            let now = params[0].value.to_vec();
            for (a, b) in now.iter().zip(&prev) {
                assert!((a - b).abs() <= bound, "step {} exceeds bound {}", (a - b).abs(), bound);
            }
            prev = now;
        }
    }
}
