//! MobileNet-style classifier: layer kernels, architecture, FLOP model and
//! weight container.

mod layers;
mod model;
mod spec;
mod weights;

pub use layers::{affine_norm, conv2d, depthwise_conv, pointwise_conv, relu, relu6, softmax, Padding};
pub use model::{
    fan_in, init_backbone_random, ModelConfig, FEATURE_DIM, HEAD_DENSE1, HEAD_DENSE2, HIDDEN_DIM, INPUT_SIZE,
    NUM_CLASSES,
};
pub use spec::{flops_estimate, FlopEstimate, LayerKind, LayerSpec};
pub use weights::{WeightStore, MAGIC, VERSION};
