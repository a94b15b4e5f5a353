//! Plain-loop image kernels for single-channel planes in row-major order:
//! bilinear resize, rotation with replicated borders, flips, crops and
//! min-max normalization. Everything runs in f64 to keep the rest of the
//! numeric stack uniform.

/// Bilinear sample with half-pixel centers and clamped (replicated) borders.
fn sample_bilinear(src: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
    let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Resizes a `(sw, sh)` plane to `(dw, dh)`. Output values are convex
/// combinations of inputs, so the value range never widens.
pub fn resize_bilinear(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    assert_eq!(src.len(), sw * sh);
    if (sw, sh) == (dw, dh) {
        return src.to_vec();
    }
    let mut out = vec![0.0; dw * dh];
    let sx_scale = sw as f64 / dw as f64;
    let sy_scale = sh as f64 / dh as f64;
    for oy in 0..dh {
        let sy = (oy as f64 + 0.5) * sy_scale - 0.5;
        for ox in 0..dw {
            let sx = (ox as f64 + 0.5) * sx_scale - 0.5;
            out[oy * dw + ox] = sample_bilinear(src, sw, sh, sx, sy);
        }
    }
    out
}

/// Rotates around the plane center by `angle` radians (counterclockwise),
/// bilinear sampling with replicated borders.
pub fn rotate_bilinear(src: &[f64], w: usize, h: usize, angle: f64) -> Vec<f64> {
    assert_eq!(src.len(), w * h);
    let (sin, cos) = angle.sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; w * h];
    for oy in 0..h {
        for ox in 0..w {
            let dx = ox as f64 - cx;
            let dy = oy as f64 - cy;
            // inverse map of the output rotation
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            out[oy * w + ox] = sample_bilinear(src, w, h, sx, sy);
        }
    }
    out
}

pub fn hflip(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    assert_eq!(src.len(), w * h);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = src[y * w + (w - 1 - x)];
        }
    }
    out
}

pub fn crop(src: &[f64], w: usize, h: usize, x0: usize, y0: usize, cw: usize, ch: usize) -> Vec<f64> {
    assert!(x0 + cw <= w && y0 + ch <= h, "crop window out of bounds");
    let mut out = vec![0.0; cw * ch];
    for y in 0..ch {
        out[y * cw..(y + 1) * cw].copy_from_slice(&src[(y0 + y) * w + x0..(y0 + y) * w + x0 + cw]);
    }
    out
}

/// Rescales in place to span [0, 1]. A constant plane (no spread) maps to all
/// zeros.
pub fn minmax_normalize(plane: &mut [f64]) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in plane.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi > lo {
        let span = hi - lo;
        for v in plane.iter_mut() {
            *v = (*v - lo) / span;
        }
    } else {
        plane.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_constant_plane_stays_constant() {
        let src = vec![3.5; 48 * 48];
        let out = resize_bilinear(&src, 48, 48, 64, 64);
        assert_eq!(out.len(), 64 * 64);
        assert!(out.iter().all(|&v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn resize_stays_within_input_range() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let src: Vec<f64> = (0..30 * 20).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lo = src.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (dw, dh) in [(64, 64), (7, 9), (30, 20)] {
            let out = resize_bilinear(&src, 30, 20, dw, dh);
            assert!(out.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }

    #[test]
    fn rotation_by_zero_is_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let src: Vec<f64> = (0..64 * 64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let out = rotate_bilinear(&src, 64, 64, 0.0);
        for (a, b) in out.iter().zip(&src) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hflip_is_an_involution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let src: Vec<f64> = (0..16 * 8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let twice = hflip(&hflip(&src, 16, 8), 16, 8);
        assert_eq!(twice, src);
    }

    #[test]
    fn minmax_hits_zero_and_one() {
        let mut v = vec![2.0, 4.0, 6.0];
        minmax_normalize(&mut v);
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        let mut flat = vec![5.0; 4];
        minmax_normalize(&mut flat);
        assert_eq!(flat, vec![0.0; 4]);
    }

    #[test]
    fn crop_extracts_the_window() {
        let src: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let c = crop(&src, 4, 4, 1, 1, 2, 2);
        assert_eq!(c, vec![5.0, 6.0, 9.0, 10.0]);
    }
}
