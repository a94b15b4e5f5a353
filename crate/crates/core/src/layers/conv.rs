//! 2D convolutions over NCHW tensors: grouped/dilated/strided standard
//! convolutions via im2col + GEMM, depthwise-separable pairs, and transposed
//! convolutions defined as the exact adjoint of a same-padded strided
//! convolution so that spatial round trips are lossless.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::ops::{gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::{Tape, Tensor};

/// Zero-padding convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output extent `ceil(in/stride)`; zero padding split symmetrically with
    /// the extra pixel on the bottom/right when the total is odd.
    Same,
    /// No padding; output extent `floor((in - k_eff)/stride) + 1`.
    Valid,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub groups: usize,
    pub padding: Padding,
    pub bias: bool,
}

impl ConvSpec {
    /// 3x3 stride-1 same-padded convolution, the architecture's workhorse.
    pub fn k3(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: (3, 3),
            stride: (1, 1),
            dilation: (1, 1),
            groups: 1,
            padding: Padding::Same,
            bias: true,
        }
    }

    pub fn k1(in_channels: usize, out_channels: usize) -> Self {
        ConvSpec { kernel: (1, 1), ..ConvSpec::k3(in_channels, out_channels) }
    }

    pub fn with_dilation(mut self, d: usize) -> Self {
        self.dilation = (d, d);
        self
    }

    pub fn with_stride(mut self, s: usize) -> Self {
        self.stride = (s, s);
        self
    }

    pub fn with_groups(mut self, g: usize) -> Self {
        self.groups = g;
        self
    }

    pub fn no_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    /// Depthwise: one filter per input channel.
    pub fn depthwise(channels: usize) -> Self {
        ConvSpec::k3(channels, channels).with_groups(channels).no_bias()
    }

    /// Kernel extent including dilation gaps: `k + (k-1)(d-1)`.
    pub fn effective_kernel(&self) -> (usize, usize) {
        let (kh, kw) = self.kernel;
        let (dh, dw) = self.dilation;
        (kh + (kh - 1) * (dh - 1), kw + (kw - 1) * (dw - 1))
    }

    /// Expected weight shape `(out, in/groups, kh, kw)`.
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels / self.groups, self.kernel.0, self.kernel.1]
    }

    pub fn weight_count(&self) -> usize {
        self.weight_shape().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let ok_positive = self.in_channels > 0
            && self.out_channels > 0
            && self.kernel.0 > 0
            && self.kernel.1 > 0
            && self.stride.0 > 0
            && self.stride.1 > 0
            && self.dilation.0 > 0
            && self.dilation.1 > 0
            && self.groups > 0;
        if !ok_positive {
            return Err(Error::shape("conv2d", format!("non-positive dimension in {:?}", self)));
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "groups {} must divide in_channels {} and out_channels {}",
                    self.groups, self.in_channels, self.out_channels
                ),
            ));
        }
        Ok(())
    }
}

/// Output extent and leading pad for one spatial axis.
fn axis_geometry(op: &'static str, input: usize, k_eff: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Valid => {
            if input < k_eff {
                return Err(Error::shape(op, format!("input extent {} below effective kernel {}", input, k_eff)));
            }
            Ok(((input - k_eff) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k_eff).saturating_sub(input);
            Ok((out, total / 2))
        }
    }
}

struct Geometry {
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
}

fn conv_geometry(x_h: usize, x_w: usize, spec: &ConvSpec) -> Result<Geometry> {
    let (keh, kew) = spec.effective_kernel();
    let (oh, pad_top) = axis_geometry("conv2d", x_h, keh, spec.stride.0, spec.padding)?;
    let (ow, pad_left) = axis_geometry("conv2d", x_w, kew, spec.stride.1, spec.padding)?;
    Ok(Geometry { oh, ow, pad_top, pad_left })
}

/// Lowers one image's group-slice into a `(cg*kh*kw) x (oh*ow)` column matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(
    x: &[f64],
    (h, w): (usize, usize),
    cg: usize,
    spec: &ConvSpec,
    geo: &Geometry,
    cols: &mut [f64],
) {
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (dh, dw) = spec.dilation;
    let ohw = geo.oh * geo.ow;
    for ci in 0..cg {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ci * kh + ki) * kw + kj) * ohw;
                for oy in 0..geo.oh {
                    let iy = (oy * sh + ki * dh) as isize - geo.pad_top as isize;
                    let dst = &mut cols[row + oy * geo.ow..row + (oy + 1) * geo.ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * sw + kj * dw) as isize - geo.pad_left as isize;
                        *d = if ix < 0 || ix >= w as isize { 0.0 } else { src_row[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds column gradients back onto the image.
#[allow(clippy::too_many_arguments)]
fn col2im(
    cols: &[f64],
    (h, w): (usize, usize),
    cg: usize,
    spec: &ConvSpec,
    geo: &Geometry,
    x_grad: &mut [f64],
) {
    let (kh, kw) = spec.kernel;
    let (sh, sw) = spec.stride;
    let (dh, dw) = spec.dilation;
    let ohw = geo.oh * geo.ow;
    for ci in 0..cg {
        let plane = &mut x_grad[ci * h * w..(ci + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ci * kh + ki) * kw + kj) * ohw;
                for oy in 0..geo.oh {
                    let iy = (oy * sh + ki * dh) as isize - geo.pad_top as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &cols[row + oy * geo.ow..row + (oy + 1) * geo.ow];
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &s) in src.iter().enumerate() {
                        let ix = (ox * sw + kj * dw) as isize - geo.pad_left as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

/// Grouped/dilated/strided 2D convolution of an NCHW tensor.
///
/// `weights` is `(out, in/groups, kh, kw)`; `bias`, when present, is `(out,)`.
pub fn conv2d(tape: &Tape, x: &Tensor, weights: &Tensor, bias: Option<&Tensor>, spec: &ConvSpec) -> Result<Tensor> {
    spec.validate()?;
    let (n, cin, h, w) = x.dims4("conv2d")?;
    if cin != spec.in_channels {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels, spec expects {}", cin, spec.in_channels),
        ));
    }
    let expect = spec.weight_shape();
    if weights.shape() != expect {
        return Err(Error::shape(
            "conv2d",
            format!("weight shape {:?}, expected {:?}", weights.shape(), expect),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [spec.out_channels] {
            return Err(Error::shape(
                "conv2d",
                format!("bias shape {:?}, expected [{}]", b.shape(), spec.out_channels),
            ));
        }
    }
    let geo = conv_geometry(h, w, spec)?;
    let (oh, ow) = (geo.oh, geo.ow);
    let ohw = oh * ow;
    let groups = spec.groups;
    let cg = spec.in_channels / groups;
    let og = spec.out_channels / groups;
    let kk = cg * spec.kernel.0 * spec.kernel.1;

    let mut out = vec![0.0; n * spec.out_channels * ohw];
    {
        let xd = x.data();
        let wd = weights.data();
        let mut cols = vec![0.0; kk * ohw];
        for ni in 0..n {
            for g in 0..groups {
                let xs = &xd[(ni * cin + g * cg) * h * w..(ni * cin + (g + 1) * cg) * h * w];
                im2col(xs, (h, w), cg, spec, &geo, &mut cols);
                let wg = &wd[g * og * kk..(g + 1) * og * kk];
                let res = gemm_nn(wg, &cols, og, kk, ohw);
                out[(ni * spec.out_channels + g * og) * ohw..(ni * spec.out_channels + (g + 1) * og) * ohw]
                    .copy_from_slice(&res);
            }
        }
        if let Some(b) = bias {
            let bd = b.data();
            for ni in 0..n {
                for oc in 0..spec.out_channels {
                    let plane = &mut out[(ni * spec.out_channels + oc) * ohw..(ni * spec.out_channels + oc + 1) * ohw];
                    let bv = bd[oc];
                    for v in plane.iter_mut() {
                        *v += bv;
                    }
                }
            }
        }
    }

    let spec_c = *spec;
    let xc = x.clone();
    let wc = weights.clone();
    let has_bias = bias.is_some();
    let inputs: Vec<&Tensor> = match bias {
        Some(b) => vec![x, weights, b],
        None => vec![x, weights],
    };
    let out_channels = spec.out_channels;
    tape.record(
        "conv2d",
        &inputs,
        move || Tensor::new(&[n, out_channels, oh, ow], out),
        move |og_all, needs| {
            let geo = conv_geometry(h, w, &spec_c).expect("geometry re-derivation");
            let xd = xc.data();
            let wd = wc.data();
            let mut gx = needs[0].then(|| vec![0.0; n * cin * h * w]);
            let mut gw = needs[1].then(|| vec![0.0; wc.numel()]);
            let mut cols = vec![0.0; kk * ohw];
            if needs[0] || needs[1] {
                for ni in 0..n {
                    for g in 0..groups {
                        let og_slice = &og_all
                            [(ni * out_channels + g * og) * ohw..(ni * out_channels + (g + 1) * og) * ohw];
                        if let Some(gw) = gw.as_mut() {
                            let xs = &xd[(ni * cin + g * cg) * h * w..(ni * cin + (g + 1) * cg) * h * w];
                            im2col(xs, (h, w), cg, &spec_c, &geo, &mut cols);
                            let dw = gemm_nt(og_slice, &cols, og, ohw, kk);
                            for (d, s) in gw[g * og * kk..(g + 1) * og * kk].iter_mut().zip(&dw) {
                                *d += s;
                            }
                        }
                        if let Some(gx) = gx.as_mut() {
                            let wg = &wd[g * og * kk..(g + 1) * og * kk];
                            let dcols = gemm_tn(wg, og_slice, kk, og, ohw);
                            let xg =
                                &mut gx[(ni * cin + g * cg) * h * w..(ni * cin + (g + 1) * cg) * h * w];
                            col2im(&dcols, (h, w), cg, &spec_c, &geo, xg);
                        }
                    }
                }
            }
            let mut grads = vec![gx, gw];
            if has_bias {
                grads.push(needs[2].then(|| {
                    let mut gb = vec![0.0; out_channels];
                    for ni in 0..n {
                        for oc in 0..out_channels {
                            gb[oc] += og_all[(ni * out_channels + oc) * ohw..(ni * out_channels + oc + 1) * ohw]
                                .iter()
                                .sum::<f64>();
                        }
                    }
                    gb
                }));
            }
            grads
        },
    )
}

/// Transposed 2D convolution, the exact adjoint of a stride-`s` same-padded
/// convolution from the target extent. `weights` is `(out, in, kh, kw)`.
///
/// `target_hw` names the spatial extent to restore; `None` doubles the input
/// extent (`H' = 2H` with stride 2). An extent the inverse convolution could
/// not have produced from this input is rejected with both sizes named.
pub fn transposed_conv2d(
    tape: &Tape,
    x: &Tensor,
    weights: &Tensor,
    bias: Option<&Tensor>,
    stride: (usize, usize),
    target_hw: Option<(usize, usize)>,
) -> Result<Tensor> {
    let (n, cin, h, w) = x.dims4("transposed_conv2d")?;
    let wshape = weights.shape().to_vec();
    if wshape.len() != 4 || wshape[1] != cin {
        return Err(Error::shape(
            "transposed_conv2d",
            format!("weight shape {:?} incompatible with {} input channels", wshape, cin),
        ));
    }
    let (cout, kh, kw) = (wshape[0], wshape[2], wshape[3]);
    let (sh, sw) = stride;
    if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
        return Err(Error::shape("transposed_conv2d", "non-positive kernel or stride"));
    }
    let (th, tw) = target_hw.unwrap_or((sh * h, sw * w));
    for (t, i, s, k, axis) in [(th, h, sh, kh, "H"), (tw, w, sw, kw, "W")] {
        let (expect_out, _) = axis_geometry("transposed_conv2d", t, k, s, Padding::Same)?;
        if expect_out != i {
            return Err(Error::shape(
                "transposed_conv2d",
                format!(
                    "cannot re-expand {axis}={i} to target {t} with stride {s}: the forward reduction of {t} yields {expect_out}"
                ),
            ));
        }
    }
    let (_, pad_top) = axis_geometry("transposed_conv2d", th, kh, sh, Padding::Same)?;
    let (_, pad_left) = axis_geometry("transposed_conv2d", tw, kw, sw, Padding::Same)?;

    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::shape(
                "transposed_conv2d",
                format!("bias shape {:?}, expected [{}]", b.shape(), cout),
            ));
        }
    }

    let mut out = vec![0.0; n * cout * th * tw];
    {
        let xd = x.data();
        let wd = weights.data();
        for ni in 0..n {
            for co in 0..cout {
                let oplane = &mut out[(ni * cout + co) * th * tw..(ni * cout + co + 1) * th * tw];
                for ci in 0..cin {
                    let xplane = &xd[(ni * cin + ci) * h * w..(ni * cin + ci + 1) * h * w];
                    let wk = &wd[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                    for iy in 0..h {
                        for ix in 0..w {
                            let v = xplane[iy * w + ix];
                            if v == 0.0 {
                                continue;
                            }
                            for ki in 0..kh {
                                let oy = (iy * sh + ki) as isize - pad_top as isize;
                                if oy < 0 || oy >= th as isize {
                                    continue;
                                }
                                for kj in 0..kw {
                                    let ox = (ix * sw + kj) as isize - pad_left as isize;
                                    if ox >= 0 && ox < tw as isize {
                                        oplane[oy as usize * tw + ox as usize] += v * wk[ki * kw + kj];
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(b) = bias {
                    let bv = b.data()[co];
                    for v in oplane.iter_mut() {
                        *v += bv;
                    }
                }
            }
        }
    }

    let xc = x.clone();
    let wc = weights.clone();
    let has_bias = bias.is_some();
    let inputs: Vec<&Tensor> = match bias {
        Some(b) => vec![x, weights, b],
        None => vec![x, weights],
    };
    tape.record(
        "transposed_conv2d",
        &inputs,
        move || Tensor::new(&[n, cout, th, tw], out),
        move |og, needs| {
            let xd = xc.data();
            let wd = wc.data();
            let mut gx = needs[0].then(|| vec![0.0; n * cin * h * w]);
            let mut gw = needs[1].then(|| vec![0.0; wc.numel()]);
            for ni in 0..n {
                for co in 0..cout {
                    let oplane = &og[(ni * cout + co) * th * tw..(ni * cout + co + 1) * th * tw];
                    for ci in 0..cin {
                        let xplane = &xd[(ni * cin + ci) * h * w..(ni * cin + ci + 1) * h * w];
                        let wk = &wd[(co * cin + ci) * kh * kw..(co * cin + ci + 1) * kh * kw];
                        for iy in 0..h {
                            for ix in 0..w {
                                let mut acc = 0.0;
                                for ki in 0..kh {
                                    let oy = (iy * sh + ki) as isize - pad_top as isize;
                                    if oy < 0 || oy >= th as isize {
                                        continue;
                                    }
                                    for kj in 0..kw {
                                        let ox = (ix * sw + kj) as isize - pad_left as isize;
                                        if ox < 0 || ox >= tw as isize {
                                            continue;
                                        }
                                        let g = oplane[oy as usize * tw + ox as usize];
                                        acc += g * wk[ki * kw + kj];
                                        if let Some(gw) = gw.as_mut() {
                                            gw[(co * cin + ci) * kh * kw + ki * kw + kj] +=
                                                g * xplane[iy * w + ix];
                                        }
                                    }
                                }
                                if let Some(gx) = gx.as_mut() {
                                    gx[(ni * cin + ci) * h * w + iy * w + ix] += acc;
                                }
                            }
                        }
                    }
                }
            }
            let mut grads = vec![gx, gw];
            if has_bias {
                grads.push(needs[2].then(|| {
                    let mut gb = vec![0.0; cout];
                    for ni in 0..n {
                        for co in 0..cout {
                            gb[co] +=
                                og[(ni * cout + co) * th * tw..(ni * cout + co + 1) * th * tw].iter().sum::<f64>();
                        }
                    }
                    gb
                }));
            }
            grads
        },
    )
}

fn he_uniform<R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::uniform(shape, -bound, bound, rng)
}

/// A convolution layer owning its weights.
pub struct Conv2d {
    pub spec: ConvSpec,
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Conv2d {
    pub fn new<R: Rng>(spec: ConvSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let wshape = spec.weight_shape();
        let fan_in = wshape[1] * wshape[2] * wshape[3];
        let weight = he_uniform(&wshape, fan_in, rng).requires_grad();
        let bias = spec.bias.then(|| Tensor::zeros(&[spec.out_channels]).requires_grad());
        Ok(Conv2d { spec, weight, bias })
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        conv2d(tape, x, &self.weight, self.bias.as_ref(), &self.spec)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<crate::tensor::Parameter>) {
        out.push(crate::tensor::Parameter { name: format!("{prefix}.weight"), value: self.weight.clone(), trainable: true });
        if let Some(b) = &self.bias {
            out.push(crate::tensor::Parameter { name: format!("{prefix}.bias"), value: b.clone(), trainable: true });
        }
    }
}

/// Depthwise 3x3 (optionally dilated) followed by a pointwise 1x1.
///
/// Weight cost is `in*kh*kw + in*out` plus the pointwise bias when enabled;
/// the depthwise stage never carries a bias.
pub struct DwsConv2d {
    pub depthwise: Conv2d,
    pub pointwise: Conv2d,
}

impl DwsConv2d {
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, dilation: usize, bias: bool, rng: &mut R) -> Result<Self> {
        let depthwise = Conv2d::new(ConvSpec::depthwise(in_channels).with_dilation(dilation), rng)?;
        let mut pw = ConvSpec::k1(in_channels, out_channels);
        pw.bias = bias;
        let pointwise = Conv2d::new(pw, rng)?;
        Ok(DwsConv2d { depthwise, pointwise })
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let mid = self.depthwise.forward(tape, x)?;
        self.pointwise.forward(tape, &mid)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<crate::tensor::Parameter>) {
        self.depthwise.collect_params(&format!("{prefix}.depthwise"), out);
        self.pointwise.collect_params(&format!("{prefix}.pointwise"), out);
    }
}

/// A transposed convolution layer owning its weights, `(out, in, kh, kw)`.
pub struct TransposedConv2d {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub stride: (usize, usize),
}

impl TransposedConv2d {
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, kernel: (usize, usize), stride: (usize, usize), bias: bool, rng: &mut R) -> Self {
        let shape = [out_channels, in_channels, kernel.0, kernel.1];
        let fan_in = in_channels * kernel.0 * kernel.1;
        let weight = he_uniform(&shape, fan_in, rng).requires_grad();
        let bias = bias.then(|| Tensor::zeros(&[out_channels]).requires_grad());
        TransposedConv2d { weight, bias, stride }
    }

    pub fn forward(&self, tape: &Tape, x: &Tensor, target_hw: Option<(usize, usize)>) -> Result<Tensor> {
        transposed_conv2d(tape, x, &self.weight, self.bias.as_ref(), self.stride, target_hw)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<crate::tensor::Parameter>) {
        out.push(crate::tensor::Parameter { name: format!("{prefix}.weight"), value: self.weight.clone(), trainable: true });
        if let Some(b) = &self.bias {
            out.push(crate::tensor::Parameter { name: format!("{prefix}.bias"), value: b.clone(), trainable: true });
        }
    }
}
