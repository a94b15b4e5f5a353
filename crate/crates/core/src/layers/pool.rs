//! Max pooling (2x2, stride 2) and global average pooling.

use crate::error::{Error, Result};
use crate::hash::Fnv64;
use crate::tensor::{Tape, Tensor};

/// 2x2 max pooling with stride 2. Spatial extents must be even. The backward
/// pass routes each window's gradient to its argmax; ties resolve to the
/// first element in row-major window order.
pub fn maxpool2x2(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4("maxpool2x2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape("maxpool2x2", format!("spatial extents must be even, got {}x{}", h, w)));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; n * c * oh * ow];
    let mut argmax = vec![0usize; n * c * oh * ow];
    {
        let xd = x.data();
        for nc in 0..n * c {
            let plane = &xd[nc * h * w..(nc + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = (oy * 2) * w + ox * 2;
                    let idx = [base, base + 1, base + w, base + w + 1];
                    let mut best = idx[0];
                    for &i in &idx[1..] {
                        if plane[i] > plane[best] {
                            best = i;
                        }
                    }
                    out[nc * oh * ow + oy * ow + ox] = plane[best];
                    argmax[nc * oh * ow + oy * ow + ox] = best;
                }
            }
        }
    }
    if tape.branch_tracking_enabled() {
        let mut hsh = Fnv64::new();
        for &a in &argmax {
            hsh.write_u64(a as u64);
        }
        tape.note_branch(hsh.finish());
    }
    let shape = [n, c, oh, ow];
    tape.record("maxpool2x2", &[x], move || Tensor::new(&shape, out), move |og, needs| {
        vec![needs[0].then(|| {
            let mut gx = vec![0.0; n * c * h * w];
            for nc in 0..n * c {
                for (o, &a) in og[nc * oh * ow..(nc + 1) * oh * ow]
                    .iter()
                    .zip(&argmax[nc * oh * ow..(nc + 1) * oh * ow])
                {
                    gx[nc * h * w + a] += o;
                }
            }
            gx
        })]
    })
}

/// Collapses each channel's spatial map to its mean: `(N,C,H,W) -> (N,C)`.
pub fn global_avg_pool(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4("global_avg_pool")?;
    let plane = h * w;
    let mut out = vec![0.0; n * c];
    {
        let xd = x.data();
        for (o, chunk) in out.iter_mut().zip(xd.chunks(plane)) {
            *o = chunk.iter().sum::<f64>() / plane as f64;
        }
    }
    tape.record("global_avg_pool", &[x], move || Tensor::new(&[n, c], out), move |og, needs| {
        vec![needs[0].then(|| {
            let mut gx = vec![0.0; n * c * plane];
            for (gchunk, &o) in gx.chunks_mut(plane).zip(og) {
                let v = o / plane as f64;
                gchunk.fill(v);
            }
            gx
        })]
    })
}
