use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::layers::{affine_norm, conv2d, depthwise_conv, pointwise_conv, relu, relu6, softmax, Padding};
use super::spec::{LayerKind, LayerSpec};
use super::weights::WeightStore;
use crate::error::{Error, Result};
use crate::numerics::{matvec, reduce_mean_spatial, Tensor};

/// Side length of the square network input.
pub const INPUT_SIZE: usize = 128;
/// Width of the pooled backbone features feeding the head.
pub const FEATURE_DIM: usize = 1024;
pub const HIDDEN_DIM: usize = 256;
pub const NUM_CLASSES: usize = 2;

pub const HEAD_DENSE1: &str = "head.dense1";
pub const HEAD_DENSE2: &str = "head.dense2";

/// Pointwise width and depthwise stride of the 13 separable blocks.
const V1_BLOCKS: [(usize, usize); 13] = [
    (64, 1),
    (128, 2),
    (128, 1),
    (256, 2),
    (256, 1),
    (512, 2),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (1024, 2),
    (1024, 1),
];

/// Network description: input extents, the ordered layer list, and the
/// index where the frozen backbone ends and the trainable head begins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    input: [usize; 3],
    layers: Vec<LayerSpec>,
    frozen_prefix: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extent {
    Map(usize, usize, usize),
    Flat(usize),
}

impl ModelConfig {
    pub fn new(input: [usize; 3], layers: Vec<LayerSpec>, frozen_prefix: usize) -> Result<Self> {
        let cfg = ModelConfig {
            input,
            layers,
            frozen_prefix,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// MobileNet-V1 (width 1.0) backbone on a 128×128×3 input followed by
    /// GAP → dense 1024→256 (relu) → dense 256→2 → softmax.
    pub fn mobilenet_v1() -> Self {
        let mut layers = Vec::new();
        let conv_block = |layers: &mut Vec<LayerSpec>, spec: LayerSpec| {
            let name = spec.name.clone();
            let d = spec.out_channels;
            layers.push(spec);
            layers.push(LayerSpec::affine_norm(format!("{name}.norm"), d));
            layers.push(LayerSpec::relu6(format!("{name}.relu6"), d));
        };
        conv_block(&mut layers, LayerSpec::conv2d("backbone.conv0", 3, 2, 3, 32));
        let mut c = 32;
        for (i, &(d, stride)) in V1_BLOCKS.iter().enumerate() {
            let block = format!("backbone.block{:02}", i + 1);
            conv_block(&mut layers, LayerSpec::depthwise(format!("{block}.dw"), 3, stride, c));
            conv_block(&mut layers, LayerSpec::pointwise(format!("{block}.pw"), c, d));
            c = d;
        }
        let frozen_prefix = layers.len();
        layers.push(LayerSpec::gap("head.gap", c));
        layers.push(LayerSpec::dense(HEAD_DENSE1, c, HIDDEN_DIM));
        layers.push(LayerSpec::relu("head.relu", HIDDEN_DIM));
        layers.push(LayerSpec::dense(HEAD_DENSE2, HIDDEN_DIM, NUM_CLASSES));
        layers.push(LayerSpec::softmax("head.softmax", NUM_CLASSES));
        ModelConfig::new([INPUT_SIZE, INPUT_SIZE, 3], layers, frozen_prefix)
            .expect("built-in architecture is consistent")
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn frozen_prefix(&self) -> usize {
        self.frozen_prefix
    }

    pub fn backbone(&self) -> &[LayerSpec] {
        &self.layers[..self.frozen_prefix]
    }

    pub fn head(&self) -> &[LayerSpec] {
        &self.layers[self.frozen_prefix..]
    }

    /// Index of the pooling layer that turns the last map into features.
    pub fn gap_index(&self) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.kind == LayerKind::Gap)
            .ok_or_else(|| Error::Config("model has no global average pooling layer".into()))
    }

    fn validate(&self) -> Result<()> {
        let mut ext = Extent::Map(self.input[0], self.input[1], self.input[2]);
        if self.input.contains(&0) {
            return Err(Error::Config(format!("input extents {:?}", self.input)));
        }
        if self.frozen_prefix > self.layers.len() {
            return Err(Error::Config("frozen prefix beyond layer list".into()));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            if i < self.frozen_prefix && !matches!(ext, Extent::Map(..)) {
                return Err(Error::Config(format!("backbone layer {} after flattening", layer.name)));
            }
            ext = next_extent(layer, ext)?;
        }
        if self.frozen_prefix < self.layers.len() && self.layers[self.frozen_prefix].kind != LayerKind::Gap {
            return Err(Error::Config("head must start with global average pooling".into()));
        }
        Ok(())
    }

    /// Every parameter tensor the layers in `range` read, in layer order.
    pub fn parameters_in(&self, range: Range<usize>) -> Vec<(String, Vec<usize>)> {
        self.layers[range].iter().flat_map(LayerSpec::parameters).collect()
    }

    pub fn backbone_parameters(&self) -> Vec<(String, Vec<usize>)> {
        self.parameters_in(0..self.frozen_prefix)
    }

    pub fn head_parameters(&self) -> Vec<(String, Vec<usize>)> {
        self.parameters_in(self.frozen_prefix..self.layers.len())
    }

    /// Checks that `weights` holds every tensor `range` needs.
    pub fn check_weights(&self, weights: &WeightStore, range: Range<usize>) -> Result<()> {
        for (name, dims) in self.parameters_in(range) {
            weights.require(&name, &dims)?;
        }
        Ok(())
    }

    /// Runs `self.layers[range]` on `x`, reporting every intermediate output
    /// to `hook(layer index, spec, output)`.
    pub fn run_layers(
        &self,
        weights: &WeightStore,
        range: Range<usize>,
        mut x: Tensor,
        hook: &mut dyn FnMut(usize, &LayerSpec, &Tensor),
    ) -> Result<Tensor> {
        for i in range {
            let layer = &self.layers[i];
            x = apply_layer(layer, weights, &x)?;
            hook(i, layer, &x);
        }
        Ok(x)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.dims() != self.input {
            return Err(Error::Shape(format!(
                "network input must be {:?}, got {:?}",
                self.input,
                input.dims()
            )));
        }
        Ok(())
    }

    /// Backbone followed by global average pooling: the cached head input.
    pub fn features(&self, weights: &WeightStore, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let gap = self.gap_index()?;
        self.run_layers(weights, 0..gap + 1, input.clone(), &mut |_, _, _| {})
    }

    /// Head layers after the pooling step, applied to pooled features.
    pub fn classify_features(&self, weights: &WeightStore, features: &Tensor) -> Result<Tensor> {
        let gap = self.gap_index()?;
        self.run_layers(weights, gap + 1..self.layers.len(), features.clone(), &mut |_, _, _| {})
    }

    /// Full network: class probabilities for one `H×W×3` input.
    pub fn forward(&self, weights: &WeightStore, input: &Tensor) -> Result<Tensor> {
        self.forward_traced(weights, input, &mut |_, _, _| {})
    }

    pub fn forward_traced(
        &self,
        weights: &WeightStore,
        input: &Tensor,
        hook: &mut dyn FnMut(usize, &LayerSpec, &Tensor),
    ) -> Result<Tensor> {
        self.check_input(input)?;
        let gap = self.gap_index()?;
        let features = self.run_layers(weights, 0..gap + 1, input.clone(), hook)?;
        self.run_layers(weights, gap + 1..self.layers.len(), features, hook)
    }
}

fn next_extent(layer: &LayerSpec, ext: Extent) -> Result<Extent> {
    let mismatch = || {
        Error::Config(format!(
            "layer {} expects {} channels, incoming extent {ext:?}",
            layer.name, layer.in_channels
        ))
    };
    let same = |n: usize, k: usize| Padding::Same.resolve(n, k, layer.stride).map(|(o, _)| o);
    match (layer.kind, ext) {
        (LayerKind::Conv2d | LayerKind::Depthwise | LayerKind::Pointwise, Extent::Map(h, w, c)) => {
            if c != layer.in_channels {
                return Err(mismatch());
            }
            Ok(Extent::Map(
                same(h, layer.kernel)?,
                same(w, layer.kernel)?,
                layer.out_channels,
            ))
        }
        (LayerKind::AffineNorm | LayerKind::Relu6 | LayerKind::Relu, Extent::Map(_, _, c))
        | (LayerKind::Relu6 | LayerKind::Relu | LayerKind::Softmax, Extent::Flat(c)) => {
            if c != layer.in_channels {
                return Err(mismatch());
            }
            Ok(ext)
        }
        (LayerKind::Gap, Extent::Map(_, _, c)) if c == layer.in_channels => Ok(Extent::Flat(c)),
        (LayerKind::Dense, Extent::Flat(n)) if n == layer.in_channels => Ok(Extent::Flat(layer.out_channels)),
        _ => Err(mismatch()),
    }
}

fn apply_layer(layer: &LayerSpec, weights: &WeightStore, x: &Tensor) -> Result<Tensor> {
    let params = layer.parameters();
    let p = |i: usize| weights.require(&params[i].0, &params[i].1);
    match layer.kind {
        LayerKind::Conv2d => conv2d(x, p(0)?, p(1)?, layer.stride, Padding::Same),
        LayerKind::Depthwise => depthwise_conv(x, p(0)?, p(1)?, layer.stride, Padding::Same),
        LayerKind::Pointwise => {
            let (c, d) = (layer.in_channels, layer.out_channels);
            let w = p(0)?;
            debug_assert_eq!(w.dims(), &[c, d]);
            pointwise_conv(x, w, p(1)?)
        }
        LayerKind::AffineNorm => affine_norm(x, p(0)?, p(1)?),
        LayerKind::Relu6 => relu6(x),
        LayerKind::Relu => relu(x),
        LayerKind::Gap => reduce_mean_spatial(x),
        LayerKind::Dense => matvec(p(0)?, x, p(1)?),
        LayerKind::Softmax => softmax(x),
    }
}

/// Fan-in used for He-uniform bounds.
pub fn fan_in(layer: &LayerSpec) -> usize {
    match layer.kind {
        LayerKind::Conv2d => layer.kernel * layer.kernel * layer.in_channels,
        LayerKind::Depthwise => layer.kernel * layer.kernel,
        _ => layer.in_channels,
    }
}

/// Stand-in backbone weights from a seeded PCG64 (XSL-RR 128/64) stream.
///
/// Convolution kernels are drawn uniformly from `±sqrt(6 / fan_in)`, layer by
/// layer in architecture order; biases are zero and every normalization is
/// the identity (scale 1, shift 0).
pub fn init_backbone_random(config: &ModelConfig, seed: u64) -> WeightStore {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut store = WeightStore::new();
    for layer in config.backbone() {
        for (name, dims) in layer.parameters() {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = if name.ends_with(".w") {
                let bound = (6.0 / fan_in(layer) as f64).sqrt() as f32;
                (0..n).map(|_| rng.random_range(-bound..bound)).collect()
            } else if name.ends_with(".scale") {
                vec![1.0; n]
            } else {
                vec![0.0; n]
            };
            let t = Tensor::from_vec(&dims, data).expect("parameter dims are valid");
            store.insert(name, t).expect("generated names are valid");
        }
    }
    store
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v1_shape_arithmetic() {
        let cfg = ModelConfig::mobilenet_v1();
        let dw = cfg.layers().iter().filter(|l| l.kind == LayerKind::Depthwise).count();
        let pw = cfg.layers().iter().filter(|l| l.kind == LayerKind::Pointwise).count();
        assert_eq!((dw, pw), (13, 13));
        let mut ext = Extent::Map(128, 128, 3);
        for l in cfg.backbone() {
            ext = next_extent(l, ext).unwrap();
        }
        assert_eq!(ext, Extent::Map(4, 4, 1024));
        assert_eq!(cfg.head()[0].kind, LayerKind::Gap);
        let names: Vec<String> = cfg.head_parameters().into_iter().map(|p| p.0).collect();
        assert_eq!(
            names,
            ["head.dense1.w", "head.dense1.b", "head.dense2.w", "head.dense2.b"]
        );
    }

    #[test]
    fn rejects_broken_chain() {
        let layers = vec![
            LayerSpec::conv2d("c", 3, 1, 3, 8),
            LayerSpec::pointwise("p", 4, 8),
            LayerSpec::gap("g", 8),
        ];
        assert!(ModelConfig::new([8, 8, 3], layers, 2).is_err());
    }

    #[test]
    fn random_backbone_is_seeded() {
        let cfg = ModelConfig::mobilenet_v1();
        let a = init_backbone_random(&cfg, 42);
        assert_eq!(a, init_backbone_random(&cfg, 42));
        assert_ne!(a, init_backbone_random(&cfg, 43));
        cfg.check_weights(&a, 0..cfg.frozen_prefix()).unwrap();
        for layer in cfg.backbone() {
            for (name, _) in layer.parameters().into_iter().filter(|p| p.0.ends_with(".w")) {
                let bound = (6.0 / fan_in(layer) as f64).sqrt() as f32;
                let t = a.get(&name).unwrap();
                assert!(t.data().iter().all(|v| v.abs() <= bound), "{name}");
            }
        }
    }

    #[test]
    fn missing_weight_named_in_error() {
        let cfg = ModelConfig::mobilenet_v1();
        let input = Tensor::zeros(&[128, 128, 3]).unwrap();
        let err = cfg.forward(&WeightStore::new(), &input).unwrap_err();
        assert!(err.to_string().contains("backbone.conv0.w"), "{err}");
    }
}
