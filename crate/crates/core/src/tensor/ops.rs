//! Primitive recorded operations: elementwise arithmetic with broadcasting,
//! matrix products, activations, reductions and channel plumbing. Layer-level
//! operations (convolutions, pooling, normalization) live in `crate::layers`
//! and are built on [`Tape::record`] just like these.

use crate::error::{Error, Result};
use crate::hash::Fnv64;

use super::{Tape, Tensor};

// -- broadcasting helpers ----------------------------------------------------

/// Output shape of a same-rank broadcast (each dim equal, or 1 on one side).
fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::shape(op, format!("rank mismatch: {:?} vs {:?}", a, b)));
    }
    a.iter()
        .zip(b)
        .map(|(&da, &db)| {
            if da == db || da == 1 || db == 1 {
                Ok(da.max(db))
            } else {
                Err(Error::shape(op, format!("incompatible extents: {:?} vs {:?}", a, b)))
            }
        })
        .collect()
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Materializes `data` (of shape `from`) broadcast up to shape `to`.
fn expand_to(data: &[f64], from: &[usize], to: &[usize]) -> Vec<f64> {
    if from == to {
        return data.to_vec();
    }
    let numel: usize = to.iter().product();
    let fs = strides(from);
    let mut out = vec![0.0; numel];
    let mut idx = vec![0usize; to.len()];
    for slot in out.iter_mut() {
        let mut src = 0;
        for (d, &i) in idx.iter().enumerate() {
            if from[d] != 1 {
                src += i * fs[d];
            }
        }
        *slot = data[src];
        for d in (0..to.len()).rev() {
            idx[d] += 1;
            if idx[d] < to[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// Sums `grad` (of shape `from`) down to shape `to`, the adjoint of
/// [`expand_to`].
fn reduce_to(grad: &[f64], from: &[usize], to: &[usize]) -> Vec<f64> {
    if from == to {
        return grad.to_vec();
    }
    let numel: usize = to.iter().product();
    let ts = strides(to);
    let mut out = vec![0.0; numel];
    let mut idx = vec![0usize; from.len()];
    for &g in grad {
        let mut dst = 0;
        for (d, &i) in idx.iter().enumerate() {
            if to[d] != 1 {
                dst += i * ts[d];
            }
        }
        out[dst] += g;
        for d in (0..from.len()).rev() {
            idx[d] += 1;
            if idx[d] < from[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

// -- dense matrix kernels (row-major) ----------------------------------------

/// C(m,n) = A(m,k) * B(k,n)
pub(crate) fn gemm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += aip * bv;
            }
        }
    }
    c
}

/// C(m,n) = A(m,k) * B(n,k)^T
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            c[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// C(m,n) = A(k,m)^T * B(k,n)
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

// -- elementwise arithmetic ---------------------------------------------------

fn binary_broadcast(
    tape: &Tape,
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
    dfa: impl Fn(f64, f64) -> f64 + 'static,
    dfb: impl Fn(f64, f64) -> f64 + 'static,
) -> Result<Tensor> {
    let out_shape = broadcast_shape(op, a.shape(), b.shape())?;
    let ae = expand_to(&a.data(), a.shape(), &out_shape);
    let be = expand_to(&b.data(), b.shape(), &out_shape);
    let data: Vec<f64> = ae.iter().zip(&be).map(|(&x, &y)| f(x, y)).collect();
    let a_shape = a.shape().to_vec();
    let b_shape = b.shape().to_vec();
    let out_shape2 = out_shape.clone();
    tape.record(op, &[a, b], move || Tensor::new(&out_shape, data), move |og, needs| {
        let ga = needs[0].then(|| {
            let full: Vec<f64> = og.iter().zip(ae.iter().zip(&be)).map(|(&g, (&x, &y))| g * dfa(x, y)).collect();
            reduce_to(&full, &out_shape2, &a_shape)
        });
        let gb = needs[1].then(|| {
            let full: Vec<f64> = og.iter().zip(ae.iter().zip(&be)).map(|(&g, (&x, &y))| g * dfb(x, y)).collect();
            reduce_to(&full, &out_shape2, &b_shape)
        });
        vec![ga, gb]
    })
}

/// Elementwise addition with same-rank broadcasting.
pub fn add(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary_broadcast(tape, "add", a, b, |x, y| x + y, |_, _| 1.0, |_, _| 1.0)
}

pub fn sub(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary_broadcast(tape, "sub", a, b, |x, y| x - y, |_, _| 1.0, |_, _| -1.0)
}

/// Elementwise (Hadamard) product with same-rank broadcasting.
pub fn mul(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary_broadcast(tape, "mul", a, b, |x, y| x * y, |_, y| y, |x, _| x)
}

pub fn scale(tape: &Tape, a: &Tensor, k: f64) -> Result<Tensor> {
    let data: Vec<f64> = a.data().iter().map(|&v| v * k).collect();
    let shape = a.shape().to_vec();
    tape.record("scale", &[a], move || Tensor::new(&shape, data), move |og, needs| {
        vec![needs[0].then(|| og.iter().map(|&g| g * k).collect())]
    })
}

pub fn add_scalar(tape: &Tape, a: &Tensor, k: f64) -> Result<Tensor> {
    let data: Vec<f64> = a.data().iter().map(|&v| v + k).collect();
    let shape = a.shape().to_vec();
    tape.record("add_scalar", &[a], move || Tensor::new(&shape, data), move |og, needs| {
        vec![needs[0].then(|| og.to_vec())]
    })
}

// -- matrix products -----------------------------------------------------------

/// `a (m,k) @ b (k,n) -> (m,n)`
pub fn matmul(tape: &Tape, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, ka) = a.dims2("matmul")?;
    let (kb, n) = b.dims2("matmul")?;
    if ka != kb {
        return Err(Error::shape("matmul", format!("inner extents differ: {} vs {}", ka, kb)));
    }
    let data = gemm_nn(&a.data(), &b.data(), m, ka, n);
    let (ac, bc) = (a.clone(), b.clone());
    tape.record("matmul", &[a, b], move || Tensor::new(&[m, n], data), move |og, needs| {
        let ga = needs[0].then(|| gemm_nt(og, &bc.data(), m, n, ka));
        let gb = needs[1].then(|| gemm_tn(&ac.data(), og, ka, m, n));
        vec![ga, gb]
    })
}

/// Affine map `x (n,f) @ w (o,f)^T + bias (o) -> (n,o)`; weights are stored
/// as (out, in) rows.
pub fn linear(tape: &Tape, x: &Tensor, w: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let (n, f) = x.dims2("linear")?;
    let (o, fw) = w.dims2("linear")?;
    if f != fw {
        return Err(Error::shape("linear", format!("input features {} vs weight features {}", f, fw)));
    }
    if let Some(b) = bias {
        if b.shape() != [o] {
            return Err(Error::shape("linear", format!("bias shape {:?}, expected [{}]", b.shape(), o)));
        }
    }
    let mut data = gemm_nt(&x.data(), &w.data(), n, f, o);
    if let Some(b) = bias {
        let bd = b.data();
        for row in data.chunks_mut(o) {
            for (v, &bv) in row.iter_mut().zip(bd.iter()) {
                *v += bv;
            }
        }
    }
    let (xc, wc) = (x.clone(), w.clone());
    let inputs: Vec<&Tensor> = match bias {
        Some(b) => vec![x, w, b],
        None => vec![x, w],
    };
    let has_bias = bias.is_some();
    tape.record("linear", &inputs, move || Tensor::new(&[n, o], data), move |og, needs| {
        let gx = needs[0].then(|| gemm_nn(og, &wc.data(), n, o, f));
        let gw = needs[1].then(|| gemm_tn(og, &xc.data(), o, n, f));
        let mut grads = vec![gx, gw];
        if has_bias {
            grads.push(needs[2].then(|| {
                let mut gb = vec![0.0; o];
                for row in og.chunks(o) {
                    for (g, &v) in gb.iter_mut().zip(row) {
                        *g += v;
                    }
                }
                gb
            }));
        }
        grads
    })
}

// -- activations -----------------------------------------------------------------

pub fn relu(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let xd = x.to_vec();
    if tape.branch_tracking_enabled() {
        let mut h = Fnv64::new();
        for &v in &xd {
            h.write(&[(v > 0.0) as u8]);
        }
        tape.note_branch(h.finish());
    }
    let data: Vec<f64> = xd.iter().map(|&v| v.max(0.0)).collect();
    let shape = x.shape().to_vec();
    tape.record("relu", &[x], move || Tensor::new(&shape, data), move |og, needs| {
        vec![needs[0].then(|| og.iter().zip(&xd).map(|(&g, &v)| if v > 0.0 { g } else { 0.0 }).collect())]
    })
}

pub fn sigmoid(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let data: Vec<f64> = x
        .data()
        .iter()
        .map(|&v| if v >= 0.0 { 1.0 / (1.0 + (-v).exp()) } else { let e = v.exp(); e / (1.0 + e) })
        .collect();
    let shape = x.shape().to_vec();
    let y = data.clone();
    tape.record("sigmoid", &[x], move || Tensor::new(&shape, data), move |og, needs| {
        vec![needs[0].then(|| og.iter().zip(&y).map(|(&g, &yv)| g * yv * (1.0 - yv)).collect())]
    })
}

/// Row-wise softmax over a (n, k) tensor, computed with a max shift.
pub fn softmax_rows(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (n, k) = x.dims2("softmax")?;
    let mut data = vec![0.0; n * k];
    {
        let xd = x.data();
        for (row_out, row_in) in data.chunks_mut(k).zip(xd.chunks(k)) {
            let m = row_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, &v) in row_out.iter_mut().zip(row_in) {
                *o = (v - m).exp();
                z += *o;
            }
            for o in row_out.iter_mut() {
                *o /= z;
            }
        }
    }
    let y = data.clone();
    tape.record("softmax", &[x], move || Tensor::new(&[n, k], data), move |og, needs| {
        vec![needs[0].then(|| {
            let mut gx = vec![0.0; n * k];
            for ((gx_row, og_row), y_row) in gx.chunks_mut(k).zip(og.chunks(k)).zip(y.chunks(k)) {
                let dot: f64 = og_row.iter().zip(y_row).map(|(&g, &yv)| g * yv).sum();
                for ((gv, &g), &yv) in gx_row.iter_mut().zip(og_row).zip(y_row) {
                    *gv = yv * (g - dot);
                }
            }
            gx
        })]
    })
}

// -- reductions --------------------------------------------------------------------

pub fn sum_all(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let s: f64 = x.data().iter().sum();
    let numel = x.numel();
    let shape = x.shape().to_vec();
    tape.record("sum", &[x], move || Ok(Tensor::scalar(s)), move |og, needs| {
        let _ = &shape;
        vec![needs[0].then(|| vec![og[0]; numel])]
    })
}

pub fn mean_all(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let numel = x.numel();
    if numel == 0 {
        return Err(Error::shape("mean", "empty tensor"));
    }
    let s: f64 = x.data().iter().sum::<f64>() / numel as f64;
    tape.record("mean", &[x], move || Ok(Tensor::scalar(s)), move |og, needs| {
        vec![needs[0].then(|| vec![og[0] / numel as f64; numel])]
    })
}

// -- shape plumbing -------------------------------------------------------------------

/// Copies the buffer under a new shape with the same element count.
pub fn reshape(tape: &Tape, x: &Tensor, new_shape: &[usize]) -> Result<Tensor> {
    let numel: usize = new_shape.iter().product();
    if numel != x.numel() {
        return Err(Error::shape(
            "reshape",
            format!("cannot view {:?} as {:?}", x.shape(), new_shape),
        ));
    }
    let data = x.to_vec();
    let ns = new_shape.to_vec();
    tape.record("reshape", &[x], move || Tensor::new(&ns, data), move |og, needs| {
        vec![needs[0].then(|| og.to_vec())]
    })
}

/// Concatenates NCHW tensors along the channel axis.
pub fn concat_channels(tape: &Tape, parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::shape("concat", "no inputs"));
    }
    let (n, _, h, w) = parts[0].dims4("concat")?;
    let mut channels = Vec::with_capacity(parts.len());
    for p in parts {
        let (pn, pc, ph, pw) = p.dims4("concat")?;
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::shape(
                "concat",
                format!("mismatched shapes {:?} vs {:?}", parts[0].shape(), p.shape()),
            ));
        }
        channels.push(pc);
    }
    let c_total: usize = channels.iter().sum();
    let plane = h * w;
    let mut data = vec![0.0; n * c_total * plane];
    for ni in 0..n {
        let mut c_off = 0;
        for (p, &pc) in parts.iter().zip(&channels) {
            let pd = p.data();
            let src = &pd[ni * pc * plane..(ni + 1) * pc * plane];
            let dst = &mut data[(ni * c_total + c_off) * plane..(ni * c_total + c_off + pc) * plane];
            dst.copy_from_slice(src);
            c_off += pc;
        }
    }
    let chans = channels.clone();
    tape.record("concat", parts, move || Tensor::new(&[n, c_total, h, w], data), move |og, needs| {
        let mut grads = Vec::with_capacity(chans.len());
        let mut c_off = 0;
        for (pi, &pc) in chans.iter().enumerate() {
            grads.push(needs[pi].then(|| {
                let mut g = vec![0.0; n * pc * plane];
                for ni in 0..n {
                    let src = &og[(ni * c_total + c_off) * plane..(ni * c_total + c_off + pc) * plane];
                    g[ni * pc * plane..(ni + 1) * pc * plane].copy_from_slice(src);
                }
                g
            }));
            c_off += pc;
        }
        grads
    })
}

/// Concatenates rank-2 `(N, F_i)` tensors along the feature axis.
pub fn concat_features(tape: &Tape, parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::shape("concat_features", "no inputs"));
    }
    let (n, _) = parts[0].dims2("concat_features")?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (pn, pf) = p.dims2("concat_features")?;
        if pn != n {
            return Err(Error::shape("concat_features", format!("row counts differ: {} vs {}", n, pn)));
        }
        widths.push(pf);
    }
    let f_total: usize = widths.iter().sum();
    let mut data = vec![0.0; n * f_total];
    for ni in 0..n {
        let mut off = 0;
        for (p, &pf) in parts.iter().zip(&widths) {
            let pd = p.data();
            data[ni * f_total + off..ni * f_total + off + pf].copy_from_slice(&pd[ni * pf..(ni + 1) * pf]);
            off += pf;
        }
    }
    let w = widths.clone();
    tape.record("concat_features", parts, move || Tensor::new(&[n, f_total], data), move |og, needs| {
        let mut grads = Vec::with_capacity(w.len());
        let mut off = 0;
        for (pi, &pf) in w.iter().enumerate() {
            grads.push(needs[pi].then(|| {
                let mut g = vec![0.0; n * pf];
                for ni in 0..n {
                    g[ni * pf..(ni + 1) * pf].copy_from_slice(&og[ni * f_total + off..ni * f_total + off + pf]);
                }
                g
            }));
            off += pf;
        }
        grads
    })
}

/// Gathers the listed channels of an NCHW tensor, in order.
pub fn select_channels(tape: &Tape, x: &Tensor, indices: Vec<usize>) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4("select_channels")?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= c) {
        return Err(Error::shape("select_channels", format!("channel {} out of {}", bad, c)));
    }
    let plane = h * w;
    let co = indices.len();
    let mut data = vec![0.0; n * co * plane];
    {
        let xd = x.data();
        for ni in 0..n {
            for (j, &ci) in indices.iter().enumerate() {
                let src = &xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                data[(ni * co + j) * plane..(ni * co + j + 1) * plane].copy_from_slice(src);
            }
        }
    }
    let idx = indices.clone();
    tape.record("select_channels", &[x], move || Tensor::new(&[n, co, h, w], data), move |og, needs| {
        vec![needs[0].then(|| {
            let mut g = vec![0.0; n * c * plane];
            for ni in 0..n {
                for (j, &ci) in idx.iter().enumerate() {
                    let src = &og[(ni * co + j) * plane..(ni * co + j + 1) * plane];
                    let dst = &mut g[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
            g
        })]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn add_matches_hand_values() {
        let tape = Tape::new();
        let c = add(&tape, &t(&[2], &[1.0, 2.0]), &t(&[2], &[3.0, 4.0])).unwrap();
        assert_eq!(c.to_vec(), vec![4.0, 6.0]);
    }

    #[test]
    fn broadcast_mul_reduces_grads_to_operand_shapes() {
        // (2,3) * (1,3): grad of the (1,3) side sums over the first axis.
        let tape = Tape::new();
        let a = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).requires_grad();
        let b = t(&[1, 3], &[10.0, 20.0, 30.0]).requires_grad();
        let c = mul(&tape, &a, &b).unwrap();
        assert_eq!(c.to_vec(), vec![10.0, 40.0, 90.0, 40.0, 100.0, 180.0]);
        let loss = sum_all(&tape, &c).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(a.grad().unwrap(), vec![10.0, 20.0, 30.0, 10.0, 20.0, 30.0]);
        assert_eq!(b.grad().unwrap(), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn incompatible_broadcast_is_rejected() {
        let tape = Tape::new();
        let e = add(&tape, &t(&[2, 3], &[0.0; 6]), &t(&[2, 2], &[0.0; 4]));
        assert!(e.is_err());
    }

    #[test]
    fn matmul_matches_hand_product() {
        let tape = Tape::new();
        let a = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = t(&[3, 2], &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&tape, &a, &b).unwrap();
        assert_eq!(c.to_vec(), vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn linear_bias_and_grads() {
        let tape = Tape::new();
        let x = t(&[1, 2], &[1.0, 2.0]).requires_grad();
        let w = t(&[3, 2], &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]).requires_grad();
        let b = t(&[3], &[0.5, -0.5, 0.0]).requires_grad();
        let y = linear(&tape, &x, &w, Some(&b)).unwrap();
        assert_eq!(y.to_vec(), vec![1.5, 1.5, 3.0]);
        let loss = sum_all(&tape, &y).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]); // column sums of w
        assert_eq!(w.grad().unwrap(), vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(b.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn softmax_uniform_and_shift_invariance() {
        let tape = Tape::inference();
        let u = softmax_rows(&tape, &t(&[1, 7], &[0.0; 7])).unwrap();
        for &v in u.data().iter() {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
        let z = t(&[1, 3], &[0.3, -1.2, 2.5]);
        let zc = t(&[1, 3], &[0.3 + 100.0, -1.2 + 100.0, 2.5 + 100.0]);
        let s1 = softmax_rows(&tape, &z).unwrap();
        let s2 = softmax_rows(&tape, &zc).unwrap();
        for (a, b) in s1.data().iter().zip(s2.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let sum: f64 = s1.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_two_class_value() {
        let tape = Tape::inference();
        let s = softmax_rows(&tape, &t(&[1, 2], &[1.0, 0.0])).unwrap();
        assert!((s.data()[0] - 0.73106).abs() < 1e-5);
        assert!((s.data()[1] - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn concat_then_select_roundtrip() {
        let tape = Tape::new();
        let a = t(&[1, 2, 1, 2], &[1.0, 2.0, 3.0, 4.0]).requires_grad();
        let b = t(&[1, 1, 1, 2], &[5.0, 6.0]).requires_grad();
        let c = concat_channels(&tape, &[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[1, 3, 1, 2]);
        assert_eq!(c.to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let sel = select_channels(&tape, &c, vec![2, 0]).unwrap();
        assert_eq!(sel.to_vec(), vec![5.0, 6.0, 1.0, 2.0]);
        let loss = sum_all(&tape, &sel).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(a.grad().unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(b.grad().unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn relu_gradient_masks_negatives() {
        let tape = Tape::new();
        let x = t(&[4], &[-1.0, 0.0, 0.5, 2.0]).requires_grad();
        let y = relu(&tape, &x).unwrap();
        assert_eq!(y.to_vec(), vec![0.0, 0.0, 0.5, 2.0]);
        let loss = sum_all(&tape, &y).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    }
}
