//! Central-difference gradient checking.
//!
//! Analytic gradients from the tape are compared against
//! `(f(x+h) - f(x-h)) / (2h)` per coordinate. A coordinate is excluded when
//! the two probe evaluations take different active branches through piecewise
//! operations (ReLU sign flips, pooling argmax changes, selection-index
//! changes): there the function is not differentiable along the probe segment
//! and the difference quotient is meaningless. Excluded coordinates are
//! reported, not failed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Tape, Tensor};

/// Absolute agreement floor: central differences at `h = 1e-5` in f64 carry
/// roundoff/truncation noise around 1e-9 for losses of order 10, so two
/// gradients closer than this are indistinguishable by the method and count
/// as agreeing regardless of their (possibly tiny) magnitude.
pub const FD_ATOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub pass: bool,
    /// Coordinates compared (after exclusions).
    pub checked: usize,
    /// `(input index, flat coordinate)` pairs skipped for straddling a
    /// non-differentiable point.
    pub excluded: Vec<(usize, usize)>,
    /// Worst coordinate: `(input index, coordinate, analytic, numeric)`.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    fn empty() -> Self {
        GradCheckReport { max_rel_err: 0.0, pass: true, checked: 0, excluded: Vec::new(), worst: None }
    }
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

fn eval_scalar<F>(f: &F, leaves: &[Tensor]) -> Result<(f64, u64)>
where
    F: Fn(&Tape, &[Tensor]) -> Result<Tensor>,
{
    let tape = Tape::inference();
    tape.enable_branch_tracking();
    let out = f(&tape, leaves)?;
    if out.numel() != 1 {
        return Err(Error::NonScalarLoss(out.shape().to_vec()));
    }
    Ok((out.item(), tape.branch_signature()))
}

/// Checks `f`'s analytic gradients w.r.t. every coordinate of every input.
///
/// `f` must map the given tensors to a scalar using only operations of this
/// crate. `h` is the central-difference step (1e-5 at double precision is the
/// tested regime); `pass` holds iff the worst relative error over non-excluded
/// coordinates stays below `tol`.
pub fn check_gradients<F>(f: &F, inputs: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &[Tensor]) -> Result<Tensor>,
{
    check_gradients_sampled(f, inputs, h, tol, usize::MAX, 0)
}

/// [`check_gradients`] restricted to at most `max_coords` randomly sampled
/// coordinates per input (seeded; useful for large parameter sets).
pub fn check_gradients_sampled<F>(
    f: &F,
    inputs: &[Tensor],
    h: f64,
    tol: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&Tape, &[Tensor]) -> Result<Tensor>,
{
    if h <= 0.0 {
        return Err(Error::InvalidConfig(format!("gradient check step must be positive, got {h}")));
    }

    // Analytic pass over differentiable leaves.
    let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detached_clone().requires_grad()).collect();
    let tape = Tape::new();
    let out = f(&tape, &leaves)?;
    if out.numel() != 1 {
        return Err(Error::NonScalarLoss(out.shape().to_vec()));
    }
    tape.backward(&out)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().unwrap_or_else(|| vec![0.0; l.numel()]))
        .collect();

    // Finite-difference probes over plain leaves.
    let frozen: Vec<Tensor> = inputs.iter().map(|t| t.detached_clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::empty();
    for (ti, base) in frozen.iter().enumerate() {
        let mut coords: Vec<usize> = (0..base.numel()).collect();
        if coords.len() > max_coords {
            coords.shuffle(&mut rng);
            coords.truncate(max_coords);
            coords.sort_unstable();
        }
        for &ci in &coords {
            let probe = |delta: f64| -> Result<(f64, u64)> {
                let mut data = base.to_vec();
                data[ci] += delta;
                let mut probe_leaves: Vec<Tensor> = frozen.to_vec();
                probe_leaves[ti] = Tensor::new(base.shape(), data)?;
                eval_scalar(&f, &probe_leaves)
            };
            let (fp, sig_p) = probe(h)?;
            let (fm, sig_m) = probe(-h)?;
            if sig_p != sig_m {
                report.excluded.push((ti, ci));
                continue;
            }
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[ti][ci];
            let err = if (a - numeric).abs() <= FD_ATOL { 0.0 } else { relative_error(a, numeric) };
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((ti, ci, a, numeric));
            }
            report.checked += 1;
        }
    }
    report.pass = report.max_rel_err < tol;
    Ok(report)
}
