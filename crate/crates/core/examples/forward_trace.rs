//! One forward pass through MobileNet-V1 with a traced activation summary.

use tumorscan::data::{class_name, generate_synthetic, preprocess};
use tumorscan::nn::{init_backbone_random, LayerKind, ModelConfig, HIDDEN_DIM, NUM_CLASSES};
use tumorscan::numerics::Tensor;
use tumorscan::train::HeadParams;

fn main() -> tumorscan::Result<()> {
    let model = ModelConfig::mobilenet_v1();
    let mut weights = init_backbone_random(&model, 42);
    // untrained head, so the probabilities are close to even
    HeadParams::init(1024, HIDDEN_DIM, 1).write_to(&mut weights)?;

    let sample = generate_synthetic(1, 5)?.swap_remove(1);
    let input = preprocess(&sample.image)?;

    let mut hook = |i: usize, layer: &tumorscan::nn::LayerSpec, out: &Tensor| {
        if layer.kind.is_conv() || matches!(layer.kind, LayerKind::Gap | LayerKind::Dense) {
            let rms = (out.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / out.len() as f64).sqrt();
            println!(
                "{i:>3} {:<26} {:>16} rms {rms:.4}",
                layer.name,
                format!("{:?}", out.dims())
            );
        }
    };
    let probs = model.forward_traced(&weights, &input, &mut hook)?;
    assert_eq!(probs.len(), NUM_CLASSES);
    println!(
        "sample class {:?}: p(no tumor) {:.4}, p(tumor) {:.4}, predicted {}",
        sample.class,
        probs.data()[0],
        probs.data()[1],
        class_name(u8::from(probs.data()[1] > probs.data()[0]))
    );
    Ok(())
}
