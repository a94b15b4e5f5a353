//! Point-wise feature selection: channels split into three equal sub-groups;
//! at each position the strongest two of the three aligned values are kept
//! and averaged, discarding the weakest third.

use crate::error::{Error, Result};
use crate::hash::Fnv64;
use crate::tensor::{Tape, Tensor};

/// `(N, C, H, W) -> (N, C/3, H, W)` with
/// `v = (max(a,b,c) + median(a,b,c)) / 2` per aligned position, which equals
/// the mean of the two largest of the three. Spatial dimensions are
/// preserved.
///
/// Backward routes half of the incoming gradient to the max element and half
/// to the median element. When values tie, the two recipients are still two
/// distinct indices, chosen in sub-group order (first group first).
pub fn pwfs(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4("pwfs")?;
    if c % 3 != 0 {
        return Err(Error::shape("pwfs", format!("channel count {} not divisible by 3", c)));
    }
    let c3 = c / 3;
    let plane = h * w;
    let out_len = n * c3 * plane;
    let mut out = vec![0.0; out_len];
    // per output position: the two sub-group indices (0..3) receiving gradient
    let mut max_sel = vec![0u8; out_len];
    let mut med_sel = vec![0u8; out_len];
    {
        let xd = x.data();
        for ni in 0..n {
            for ci in 0..c3 {
                let s0 = &xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                let s1 = &xd[(ni * c + c3 + ci) * plane..(ni * c + c3 + ci + 1) * plane];
                let s2 = &xd[(ni * c + 2 * c3 + ci) * plane..(ni * c + 2 * c3 + ci + 1) * plane];
                let base = (ni * c3 + ci) * plane;
                for p in 0..plane {
                    let v = [s0[p], s1[p], s2[p]];
                    // first index attaining the maximum
                    let mut imax = 0usize;
                    if v[1] > v[imax] {
                        imax = 1;
                    }
                    if v[2] > v[imax] {
                        imax = 2;
                    }
                    // first remaining index attaining the max of the rest
                    let rest: [usize; 2] = match imax {
                        0 => [1, 2],
                        1 => [0, 2],
                        _ => [0, 1],
                    };
                    let imed = if v[rest[1]] > v[rest[0]] { rest[1] } else { rest[0] };
                    out[base + p] = 0.5 * (v[imax] + v[imed]);
                    max_sel[base + p] = imax as u8;
                    med_sel[base + p] = imed as u8;
                }
            }
        }
    }
    if tape.branch_tracking_enabled() {
        let mut hsh = Fnv64::new();
        for (&a, &b) in max_sel.iter().zip(&med_sel) {
            hsh.write(&[a * 4 + b]);
        }
        tape.note_branch(hsh.finish());
    }
    tape.record("pwfs", &[x], move || Tensor::new(&[n, c3, h, w], out), move |og, needs| {
        vec![needs[0].then(|| {
            let mut gx = vec![0.0; n * c * plane];
            for ni in 0..n {
                for ci in 0..c3 {
                    let base = (ni * c3 + ci) * plane;
                    for p in 0..plane {
                        let g = 0.5 * og[base + p];
                        let gmax = (ni * c + max_sel[base + p] as usize * c3 + ci) * plane + p;
                        let gmed = (ni * c + med_sel[base + p] as usize * c3 + ci) * plane + p;
                        gx[gmax] += g;
                        gx[gmed] += g;
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
    use crate::tensor::ops::sum_all;

    #[test]
    fn forced_triple_value() {
        // values (1, 5, 3) at one position: max 5, median 3 -> 4.0
        let tape = Tape::inference();
        let x = Tensor::new(&[1, 3, 1, 1], vec![1.0, 5.0, 3.0]).unwrap();
        let y = pwfs(&tape, &x).unwrap();
        assert_eq!(y.to_vec(), vec![4.0]);
    }

    #[test]
    fn replicated_tensor_is_fixed_point() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let tape = Tape::inference();
        let a = Tensor::uniform(&[1, 2, 3, 3], -1.0, 1.0, &mut rng);
        let rep: Vec<f64> = a.to_vec().iter().cycle().take(a.numel() * 3).cloned().collect();
        let x = Tensor::new(&[1, 6, 3, 3], rep).unwrap();
        let y = pwfs(&tape, &x).unwrap();
        assert_eq!(y.to_vec(), a.to_vec());
    }

    #[test]
    fn channel_counts_for_block_widths() {
        let tape = Tape::inference();
        for (c, expect) in [(66usize, 22usize), (72, 24), (78, 26)] {
            let x = Tensor::zeros(&[1, c, 2, 2]);
            let y = pwfs(&tape, &x).unwrap();
            assert_eq!(y.shape(), &[1, expect, 2, 2]);
        }
    }

    #[test]
    fn non_divisible_channels_rejected() {
        let tape = Tape::inference();
        let x = Tensor::zeros(&[1, 7, 2, 2]);
        let err = pwfs(&tape, &x).unwrap_err();
        assert!(err.to_string().contains('7'), "error should name the channel count: {err}");
    }

    #[test]
    fn tie_gradient_goes_to_two_distinct_indices() {
        // all three equal: max -> group 0, median -> group 1, each gets 1/2
        let tape = Tape::new();
        let x = Tensor::new(&[1, 3, 1, 1], vec![2.0, 2.0, 2.0]).unwrap().requires_grad();
        let y = pwfs(&tape, &x).unwrap();
        assert_eq!(y.to_vec(), vec![2.0]);
        let loss = sum_all(&tape, &y).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn gradient_mass_is_preserved_per_position() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(32);
        let tape = Tape::new();
        let x = Tensor::uniform(&[2, 6, 4, 4], -1.0, 1.0, &mut rng).requires_grad();
        let y = pwfs(&tape, &x).unwrap();
        let loss = sum_all(&tape, &y).unwrap();
        tape.backward(&loss).unwrap();
        let g = x.grad().unwrap();
        // per output position the 1/2 + 1/2 split sums to 1 across the three
        // aligned input coordinates
        let plane = 16;
        for ni in 0..2 {
            for ci in 0..2 {
                for p in 0..plane {
                    let total: f64 = (0..3).map(|s| g[(ni * 6 + s * 2 + ci) * plane + p]).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_away_from_ties() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let f = |tape: &Tape, xs: &[Tensor]| {
            let y = pwfs(tape, &xs[0])?;
            let s = crate::tensor::ops::sigmoid(tape, &y)?;
            sum_all(tape, &s)
        };
        let x = Tensor::uniform(&[1, 6, 3, 3], -1.0, 1.0, &mut rng);
        let rep = crate::tensor::check_gradients(&f, &[x], 1e-5, 1e-4).unwrap();
        assert!(rep.pass, "max_rel_err {}", rep.max_rel_err);
    }
}
