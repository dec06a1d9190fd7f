//! Layer kernels. Feature maps are `H×W×C`, channel-last; every reduction
//! accumulates in `f64`.

use crate::error::{shape_err, Error, Result};
use crate::numerics::{check_finite, Tensor};

/// Spatial padding rule for strided convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    /// Output extent `ceil(in / stride)`; total pad
    /// `max((ceil(in/s) - 1)·s + k - in, 0)`, split floor-left / ceil-right.
    #[default]
    Same,
    /// No padding.
    Valid,
}

impl Padding {
    /// `(output extent, leading pad)` along one axis.
    pub fn resolve(self, input: usize, kernel: usize, stride: usize) -> Result<(usize, usize)> {
        if stride == 0 {
            return Err(shape_err!("stride must be ≥ 1"));
        }
        match self {
            Padding::Same => {
                let out = input.div_ceil(stride);
                let total = ((out - 1) * stride + kernel).saturating_sub(input);
                Ok((out, total / 2))
            }
            Padding::Valid => {
                if kernel > input {
                    return Err(shape_err!("kernel {kernel} larger than input {input}"));
                }
                Ok(((input - kernel) / stride + 1, 0))
            }
        }
    }
}

fn vector_len(t: &Tensor, what: &str) -> Result<usize> {
    match *t.dims() {
        [n] => Ok(n),
        ref d => Err(shape_err!("{what} must be a vector, got {d:?}")),
    }
}

fn finish(dims: &[usize], acc: Vec<f64>) -> Result<Tensor> {
    let data: Vec<f32> = acc.into_iter().map(|v| v as f32).collect();
    check_finite(&data)?;
    Tensor::from_vec(dims, data)
}

/// Standard convolution, weights `K×K×C×D`.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize, padding: Padding) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let (k, d) = match *weights.dims() {
        [k1, k2, wc, d] if k1 == k2 && wc == c => (k1, d),
        ref dims => return Err(shape_err!("conv2d weights {dims:?} do not fit input channels {c}")),
    };
    if vector_len(bias, "conv2d bias")? != d {
        return Err(shape_err!("conv2d bias {:?} does not match {d} outputs", bias.dims()));
    }
    let (oh, pad_t) = padding.resolve(h, k, stride)?;
    let (ow, pad_l) = padding.resolve(w, k, stride)?;
    let (x, wt) = (input.data(), weights.data());
    let mut out = Vec::with_capacity(oh * ow * d);
    let mut acc = vec![0f64; d];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.iter_mut().zip(bias.data()).for_each(|(a, &b)| *a = b as f64);
            for u in 0..k {
                let iy = (oy * stride + u) as isize - pad_t as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for v in 0..k {
                    let ix = (ox * stride + v) as isize - pad_l as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = &x[(iy as usize * w + ix as usize) * c..][..c];
                    let taps = &wt[(u * k + v) * c * d..][..c * d];
                    for (&xv, row) in px.iter().zip(taps.chunks_exact(d)) {
                        let xv = xv as f64;
                        for (a, &wv) in acc.iter_mut().zip(row) {
                            *a += xv * wv as f64;
                        }
                    }
                }
            }
            out.extend_from_slice(&acc);
        }
    }
    finish(&[oh, ow, d], out)
}

/// One `K×K` filter per channel, weights `K×K×C`.
pub fn depthwise_conv(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let k = match *weights.dims() {
        [k1, k2, wc] if k1 == k2 && wc == c => k1,
        ref dims => return Err(shape_err!("depthwise weights {dims:?} do not fit input channels {c}")),
    };
    if vector_len(bias, "depthwise bias")? != c {
        return Err(shape_err!(
            "depthwise bias {:?} does not match {c} channels",
            bias.dims()
        ));
    }
    let (oh, pad_t) = padding.resolve(h, k, stride)?;
    let (ow, pad_l) = padding.resolve(w, k, stride)?;
    let (x, wt) = (input.data(), weights.data());
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut acc = vec![0f64; c];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.iter_mut().zip(bias.data()).for_each(|(a, &b)| *a = b as f64);
            for u in 0..k {
                let iy = (oy * stride + u) as isize - pad_t as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for v in 0..k {
                    let ix = (ox * stride + v) as isize - pad_l as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = &x[(iy as usize * w + ix as usize) * c..][..c];
                    let taps = &wt[(u * k + v) * c..][..c];
                    for ((a, &xv), &wv) in acc.iter_mut().zip(px).zip(taps) {
                        *a += xv as f64 * wv as f64;
                    }
                }
            }
            out.extend_from_slice(&acc);
        }
    }
    finish(&[oh, ow, c], out)
}

/// Per-pixel channel mixing, weights `C×D`.
pub fn pointwise_conv(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    let d = match *weights.dims() {
        [wc, d] if wc == c => d,
        ref dims => return Err(shape_err!("pointwise weights {dims:?} do not fit input channels {c}")),
    };
    if vector_len(bias, "pointwise bias")? != d {
        return Err(shape_err!(
            "pointwise bias {:?} does not match {d} outputs",
            bias.dims()
        ));
    }
    let wt = weights.data();
    let mut out = Vec::with_capacity(h * w * d);
    let mut acc = vec![0f64; d];
    for px in input.data().chunks_exact(c) {
        acc.iter_mut().zip(bias.data()).for_each(|(a, &b)| *a = b as f64);
        for (&xv, row) in px.iter().zip(wt.chunks_exact(d)) {
            if xv == 0.0 {
                continue;
            }
            let xv = xv as f64;
            for (a, &wv) in acc.iter_mut().zip(row) {
                *a += xv * wv as f64;
            }
        }
        out.extend_from_slice(&acc);
    }
    finish(&[h, w, d], out)
}

/// `out[i,j,c] = scale[c]·in[i,j,c] + shift[c]`; folded batch normalization.
pub fn affine_norm(input: &Tensor, scale: &Tensor, shift: &Tensor) -> Result<Tensor> {
    let (h, w, c) = input.hwc()?;
    if vector_len(scale, "norm scale")? != c || vector_len(shift, "norm shift")? != c {
        return Err(shape_err!(
            "norm parameters {:?}/{:?} do not match {c} channels",
            scale.dims(),
            shift.dims()
        ));
    }
    let mut out = Vec::with_capacity(h * w * c);
    for px in input.data().chunks_exact(c) {
        for ((&x, &a), &b) in px.iter().zip(scale.data()).zip(shift.data()) {
            out.push(a as f64 * x as f64 + b as f64);
        }
    }
    finish(input.dims(), out)
}

pub fn relu(input: &Tensor) -> Result<Tensor> {
    input.map(|v| v.max(0.0))
}

/// `min(max(x, 0), 6)`.
pub fn relu6(input: &Tensor) -> Result<Tensor> {
    input.map(|v| v.clamp(0.0, 6.0))
}

/// Numerically stable softmax over a logit vector.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    let n = vector_len(z, "softmax input")?;
    let max = z.data().iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = z.data().iter().map(|&v| (v as f64 - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Numeric(format!("softmax normalizer {total}")));
    }
    finish(&[n], exps.into_iter().map(|e| e / total).collect())
}
