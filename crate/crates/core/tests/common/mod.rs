//! Shared test support: brute-force oracles kept deliberately independent of
//! the library's im2col/GEMM path, plus fixture helpers.

#![allow(dead_code)]

use lanmsff::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::uniform(shape, -1.0, 1.0, &mut r)
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch {} vs {}", a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Same-padding geometry, re-derived from first principles for the oracles.
fn same_axis(input: usize, k_eff: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + k_eff).saturating_sub(input);
    (out, total / 2)
}

/// Direct 8-nested-loop grouped/dilated/strided convolution over NCHW data.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_direct(
    x: &[f64],
    (n, cin, h, w): (usize, usize, usize, usize),
    weight: &[f64],
    (cout, kh, kw): (usize, usize, usize),
    bias: Option<&[f64]>,
    stride: (usize, usize),
    dilation: (usize, usize),
    groups: usize,
    same_padding: bool,
) -> (Vec<f64>, (usize, usize)) {
    let (sh, sw) = stride;
    let (dh, dw) = dilation;
    let (keh, kew) = (kh + (kh - 1) * (dh - 1), kw + (kw - 1) * (dw - 1));
    let ((oh, pt), (ow, pl)) = if same_padding {
        (same_axis(h, keh, sh), same_axis(w, kew, sw))
    } else {
        (((h - keh) / sh + 1, 0), ((w - kew) / sw + 1, 0))
    };
    let cg = cin / groups;
    let og = cout / groups;
    let mut out = vec![0.0; n * cout * oh * ow];
    for ni in 0..n {
        for g in 0..groups {
            for ocg in 0..og {
                let oc = g * og + ocg;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias.map_or(0.0, |b| b[oc]);
                        for cig in 0..cg {
                            let ci = g * cg + cig;
                            for ky in 0..kh {
                                let iy = (oy * sh + ky * dh) as isize - pt as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox * sw + kx * dw) as isize - pl as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += x[((ni * cin + ci) * h + iy as usize) * w + ix as usize]
                                        * weight[((oc * cg + cig) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        out[((ni * cout + oc) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
    }
    (out, (oh, ow))
}

/// Transposed-convolution oracle via the classical zero-insertion route:
/// dilate the input by the stride, pad, and correlate with the spatially
/// flipped kernel. Independent of the library's scatter-accumulate loop.
#[allow(clippy::too_many_arguments)]
pub fn transposed_conv2d_direct(
    x: &[f64],
    (n, cin, h, w): (usize, usize, usize, usize),
    weight: &[f64], // (cout, cin, kh, kw)
    (cout, kh, kw): (usize, usize, usize),
    bias: Option<&[f64]>,
    stride: (usize, usize),
    (th, tw): (usize, usize),
) -> Vec<f64> {
    let (sh, sw) = stride;
    // leading pad of the forward same-convolution from the target extent
    let (oh_check, pt) = same_axis(th, kh, sh);
    let (ow_check, pl) = same_axis(tw, kw, sw);
    assert_eq!((oh_check, ow_check), (h, w), "target not restorable");

    // zero-inserted input planes
    let (zh, zw) = ((h - 1) * sh + 1, (w - 1) * sw + 1);
    // correlation buffer offset so index t+k never leaves the buffer
    let (offy, offx) = (kh - 1 - pt, kw - 1 - pl);
    let (bh, bw) = (th + kh - 1, tw + kw - 1);

    let mut out = vec![0.0; n * cout * th * tw];
    for ni in 0..n {
        for co in 0..cout {
            let mut plane = vec![0.0; th * tw];
            for ci in 0..cin {
                let mut buf = vec![0.0; bh * bw];
                for iy in 0..h {
                    for ix in 0..w {
                        let (y, x_) = (iy * sh + offy, ix * sw + offx);
                        if y < bh && x_ < bw {
                            buf[y * bw + x_] = x[((ni * cin + ci) * h + iy) * w + ix];
                        }
                    }
                }
                let _ = (zh, zw);
                for ty in 0..th {
                    for tx in 0..tw {
                        let mut acc = 0.0;
                        for ky in 0..kh {
                            for kx in 0..kw {
                                // flipped kernel
                                let wv = weight[((co * cin + ci) * kh + (kh - 1 - ky)) * kw + (kw - 1 - kx)];
                                acc += wv * buf[(ty + ky) * bw + (tx + kx)];
                            }
                        }
                        plane[ty * tw + tx] += acc;
                    }
                }
            }
            if let Some(b) = bias {
                for v in plane.iter_mut() {
                    *v += b[co];
                }
            }
            out[(ni * cout + co) * th * tw..(ni * cout + co + 1) * th * tw].copy_from_slice(&plane);
        }
    }
    out
}

/// Windowed-max oracle for 2x2/2 pooling.
pub fn maxpool2x2_direct(x: &[f64], (n, c, h, w): (usize, usize, usize, usize)) -> Vec<f64> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; n * c * oh * ow];
    for nc in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x[nc * h * w + (oy * 2 + dy) * w + ox * 2 + dx]);
                    }
                }
                out[nc * oh * ow + oy * ow + ox] = m;
            }
        }
    }
    out
}

/// Double-loop mean oracle for global average pooling.
pub fn gap_direct(x: &[f64], (n, c, h, w): (usize, usize, usize, usize)) -> Vec<f64> {
    let mut out = vec![0.0; n * c];
    for nc in 0..n * c {
        let mut s = 0.0;
        for y in 0..h {
            for xx in 0..w {
                s += x[nc * h * w + y * w + xx];
            }
        }
        out[nc] = s / (h * w) as f64;
    }
    out
}

/// Sort-and-average-the-top-two oracle for the feature selection block.
pub fn pwfs_direct(x: &[f64], (n, c, h, w): (usize, usize, usize, usize)) -> Vec<f64> {
    let c3 = c / 3;
    let plane = h * w;
    let mut out = vec![0.0; n * c3 * plane];
    for ni in 0..n {
        for ci in 0..c3 {
            for p in 0..plane {
                let mut v = [
                    x[(ni * c + ci) * plane + p],
                    x[(ni * c + c3 + ci) * plane + p],
                    x[(ni * c + 2 * c3 + ci) * plane + p],
                ];
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out[(ni * c3 + ci) * plane + p] = 0.5 * (v[2] + v[1]);
            }
        }
    }
    out
}

/// Direct softmax evaluation.
pub fn softmax_direct(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|&v| v / s).collect()
}
