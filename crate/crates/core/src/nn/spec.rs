use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2d,
    Depthwise,
    Pointwise,
    AffineNorm,
    Relu6,
    Relu,
    Gap,
    Dense,
    Softmax,
}

impl LayerKind {
    pub fn is_conv(self) -> bool {
        matches!(self, LayerKind::Conv2d | LayerKind::Depthwise | LayerKind::Pointwise)
    }
}

/// One layer of the network. `in_channels`/`out_channels` are the feature
/// widths entering and leaving the layer (input/output size for dense).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl LayerSpec {
    fn new(name: impl Into<String>, kind: LayerKind, kernel: usize, stride: usize, c: usize, d: usize) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
            kernel,
            stride,
            in_channels: c,
            out_channels: d,
        }
    }

    pub fn conv2d(name: impl Into<String>, kernel: usize, stride: usize, c: usize, d: usize) -> Self {
        Self::new(name, LayerKind::Conv2d, kernel, stride, c, d)
    }

    pub fn depthwise(name: impl Into<String>, kernel: usize, stride: usize, c: usize) -> Self {
        Self::new(name, LayerKind::Depthwise, kernel, stride, c, c)
    }

    pub fn pointwise(name: impl Into<String>, c: usize, d: usize) -> Self {
        Self::new(name, LayerKind::Pointwise, 1, 1, c, d)
    }

    pub fn affine_norm(name: impl Into<String>, c: usize) -> Self {
        Self::new(name, LayerKind::AffineNorm, 0, 1, c, c)
    }

    pub fn relu6(name: impl Into<String>, c: usize) -> Self {
        Self::new(name, LayerKind::Relu6, 0, 1, c, c)
    }

    pub fn relu(name: impl Into<String>, c: usize) -> Self {
        Self::new(name, LayerKind::Relu, 0, 1, c, c)
    }

    pub fn gap(name: impl Into<String>, c: usize) -> Self {
        Self::new(name, LayerKind::Gap, 0, 1, c, c)
    }

    pub fn dense(name: impl Into<String>, inputs: usize, outputs: usize) -> Self {
        Self::new(name, LayerKind::Dense, 0, 1, inputs, outputs)
    }

    pub fn softmax(name: impl Into<String>, n: usize) -> Self {
        Self::new(name, LayerKind::Softmax, 0, 1, n, n)
    }

    /// Depthwise keeps its width and pointwise is 1×1.
    pub fn check(&self) -> Result<()> {
        let ok = match self.kind {
            LayerKind::Depthwise => self.in_channels == self.out_channels && self.kernel >= 1,
            LayerKind::Pointwise => self.kernel == 1,
            LayerKind::Conv2d => self.kernel >= 1,
            _ => true,
        };
        if !ok || self.in_channels == 0 || self.out_channels == 0 || !(1..=2).contains(&self.stride) {
            return Err(Error::Config(format!("inconsistent layer spec {self:?}")));
        }
        Ok(())
    }

    /// Parameter tensors this layer reads: `(name, dims)`.
    pub fn parameters(&self) -> Vec<(String, Vec<usize>)> {
        let (k, c, d) = (self.kernel, self.in_channels, self.out_channels);
        let p = |suffix: &str, dims: Vec<usize>| (format!("{}.{suffix}", self.name), dims);
        match self.kind {
            LayerKind::Conv2d => vec![p("w", vec![k, k, c, d]), p("b", vec![d])],
            LayerKind::Depthwise => vec![p("w", vec![k, k, c]), p("b", vec![c])],
            LayerKind::Pointwise => vec![p("w", vec![c, d]), p("b", vec![d])],
            LayerKind::AffineNorm => vec![p("scale", vec![c]), p("shift", vec![c])],
            LayerKind::Dense => vec![p("w", vec![d, c]), p("b", vec![d])],
            _ => Vec::new(),
        }
    }
}

/// Multiply-accumulate counts of a convolution computed as a standard
/// `K×K×C×D` convolution versus a depthwise + pointwise pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopEstimate {
    pub standard: u128,
    pub separable: u128,
    /// `separable / standard`, equal to `1/D + 1/K²`.
    pub ratio: f64,
}

/// Costs at an `h × w` output for the layer's `K`, `C` and `D`.
pub fn flops_estimate(spec: &LayerSpec, h: usize, w: usize) -> Result<FlopEstimate> {
    if !spec.kind.is_conv() {
        return Err(Error::Domain(format!("{:?} layer has no convolution cost", spec.kind)));
    }
    let (k, c, d) = (spec.kernel as u128, spec.in_channels as u128, spec.out_channels as u128);
    let hw = (h as u128) * (w as u128);
    let standard = k * k * c * d * hw;
    let separable = k * k * c * hw + c * d * hw;
    Ok(FlopEstimate {
        standard,
        separable,
        ratio: separable as f64 / standard as f64,
    })
}
