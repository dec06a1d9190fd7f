//! Trains the classification head on synthetic scans with a frozen random
//! backbone and prints the learning curve.
//!
//! cargo run --release --example train_synthetic -- [images_per_class] [seed]

use tumorscan::data::{generate_synthetic, preprocess};
use tumorscan::nn::{init_backbone_random, ModelConfig, HIDDEN_DIM};
use tumorscan::train::{extract_features, fit_head, TrainConfig};

fn main() -> tumorscan::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_class: usize = args.next().map_or(60, |s| s.parse().expect("images per class"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let model = ModelConfig::mobilenet_v1();
    let backbone = init_backbone_random(&model, 42);
    let set = generate_synthetic(per_class, seed)?;
    let images = set
        .iter()
        .map(|s| preprocess(&s.image))
        .collect::<tumorscan::Result<Vec<_>>>()?;
    let labels: Vec<u8> = set.iter().map(|s| s.label).collect();

    // The backbone is frozen, so features are computed once.
    let features = extract_features(&model, &backbone, &images, &labels)?;
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let fit = fit_head(&features, &cfg, HIDDEN_DIM)?;

    print!("{}", fit.history.to_csv());
    let best = fit.history.best();
    println!(
        "best epoch {} of {}: val loss {:.4}, val accuracy {:.4}",
        best.epoch,
        fit.history.epochs.len(),
        best.val_loss,
        best.val_accuracy
    );
    Ok(())
}
