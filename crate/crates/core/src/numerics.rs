//! Minimal dense tensor: row-major `f32` storage, channel-last feature maps,
//! rank at most 4.

use crate::error::{shape_err, Error, Result};

pub const MAX_RANK: usize = 4;

/// How a tensor's extents are read, determined by its rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `[N]`
    Vector,
    /// `[rows, cols]`
    Matrix,
    /// `[H, W, C]` (also depthwise kernels `[K, K, C]`)
    FeatureMap,
    /// `[K, K, C, D]`
    ConvWeight,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    dims: Vec<usize>,
    layout: Layout,
}

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(shape_err!("rank must be 1..={MAX_RANK}, got {}", dims.len()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(shape_err!("extent {pos} of {dims:?} is zero"));
        }
        let mut total: usize = 1;
        for &d in dims {
            total = total
                .checked_mul(d)
                .ok_or_else(|| shape_err!("element count of {dims:?} overflows"))?;
        }
        let layout = match dims.len() {
            1 => Layout::Vector,
            2 => Layout::Matrix,
            3 => Layout::FeatureMap,
            _ => Layout::ConvWeight,
        };
        Ok(Shape {
            dims: dims.to_vec(),
            layout,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Dense `f32` tensor. All stored values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
}

impl Tensor {
    /// Tensor of the given extents with every element equal to `fill`.
    pub fn new(dims: &[usize], fill: f32) -> Result<Self> {
        if !fill.is_finite() {
            return Err(Error::Numeric(format!("fill value {fill} is not finite")));
        }
        let shape = Shape::new(dims)?;
        let data = vec![fill; shape.numel()];
        Ok(Tensor { shape, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::new(dims, 0.0)
    }

    pub fn from_vec(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(shape_err!(
                "{dims:?} needs {} elements, got {}",
                shape.numel(),
                data.len()
            ));
        }
        check_finite(&data)?;
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Same data under new extents.
    pub fn reshape(self, dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.data.len() {
            return Err(shape_err!("cannot reshape {:?} into {dims:?}", self.dims()));
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Applies `f` elementwise. Fails if any result is non-finite.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        let data: Vec<f32> = self.data.iter().map(|&v| f(v)).collect();
        check_finite(&data)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// `(H, W, C)` of a rank-3 tensor.
    pub fn hwc(&self) -> Result<(usize, usize, usize)> {
        match *self.dims() {
            [h, w, c] => Ok((h, w, c)),
            ref d => Err(shape_err!("expected an H×W×C feature map, got {d:?}")),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f32> {
        if self.dims() != other.dims() {
            return Err(shape_err!("{:?} vs {:?}", self.dims(), other.dims()));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }
}

pub(crate) fn check_finite(data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!(
            "non-finite value {} at flat index {i}",
            data[i]
        ))),
        None => Ok(()),
    }
}

/// `out[i] = Σ_j w[i,j]·x[j] + bias[i]` with `f64` accumulation.
pub fn matvec(w: &Tensor, x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n, m) = match *w.dims() {
        [n, m] => (n, m),
        ref d => return Err(shape_err!("matvec weight must be rank 2, got {d:?}")),
    };
    if x.len() != m || x.rank() != 1 {
        return Err(shape_err!("matvec input {:?} does not match weight {n}×{m}", x.dims()));
    }
    if bias.len() != n || bias.rank() != 1 {
        return Err(shape_err!(
            "matvec bias {:?} does not match weight {n}×{m}",
            bias.dims()
        ));
    }
    let out: Vec<f32> = w
        .data()
        .chunks_exact(m)
        .zip(bias.data())
        .map(|(row, &b)| {
            let acc: f64 = row.iter().zip(x.data()).map(|(&wi, &xi)| wi as f64 * xi as f64).sum();
            (acc + b as f64) as f32
        })
        .collect();
    Tensor::from_vec(&[n], out)
}

/// Global average pooling: per-channel mean over the spatial extents.
pub fn reduce_mean_spatial(f: &Tensor) -> Result<Tensor> {
    let (h, w, c) = f.hwc()?;
    let mut acc = vec![0f64; c];
    for px in f.data().chunks_exact(c) {
        for (a, &v) in acc.iter_mut().zip(px) {
            *a += v as f64;
        }
    }
    let n = (h * w) as f64;
    Tensor::from_vec(&[c], acc.into_iter().map(|a| (a / n) as f32).collect())
}
