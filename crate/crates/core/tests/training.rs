mod common;

use clouds::gaussian_features;
use rand::Rng;
use tumorscan::train::{fit_head, fit_head_split, EarlyStopping, LabeledFeatures, TrainConfig, Verdict};

mod clouds {
    use super::common::rng;
    use rand::Rng;
    use tumorscan::numerics::Tensor;
    use tumorscan::train::LabeledFeatures;

    /// Two isotropic Gaussian clouds, means ±`sep`/2 along a random unit
    /// direction; Box–Muller from the crate's PCG stream.
    pub fn gaussian_features(n: usize, dim: usize, sep: f64, seed: u64) -> LabeledFeatures {
        let mut r = rng(seed);
        let mut normal = move || {
            let (u, v): (f64, f64) = (r.random_range(f64::EPSILON..1.0), r.random());
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        };
        let mut dir: Vec<f64> = (0..dim).map(|_| normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|v| *v /= norm);
        let mut feats = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let sign = if label == 1 { 0.5 } else { -0.5 };
            let x: Vec<f32> = dir.iter().map(|d| (sign * sep * d + normal()) as f32).collect();
            feats.push(Tensor::from_vec(&[dim], x).unwrap());
            labels.push(label);
        }
        LabeledFeatures::new(feats, labels).unwrap()
    }
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn separable_features_are_learned() {
    // means 6σ apart: Bayes error ≈ 0.13%
    let data = gaussian_features(400, 32, 6.0, 1);
    let fit = fit_head(&data, &cfg(1), 16).unwrap();
    let best = fit.history.best();
    assert!(best.val_accuracy >= 0.98, "val accuracy {}", best.val_accuracy);
    assert_eq!(fit.train_idx.len(), 320);
    assert_eq!(fit.val_idx.len(), 80);
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = gaussian_features(120, 16, 4.0, 2);
    let a = fit_head(&data, &cfg(5), 8).unwrap();
    let b = fit_head(&data, &cfg(5), 8).unwrap();
    assert_eq!(a, b);
    let c = fit_head(&data, &cfg(6), 8).unwrap();
    assert_ne!(a.head, c.head);
}

#[test]
fn training_loss_mostly_decreases_early() {
    let data = gaussian_features(200, 16, 4.0, 3);
    let fit = fit_head(&data, &TrainConfig { epochs: 6, ..cfg(3) }, 8).unwrap();
    let losses: Vec<f64> = fit.history.epochs.iter().map(|e| e.train_loss).collect();
    let down = losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(down >= 4, "{losses:?}");
}

/// Validation labels are the training labels flipped, so every epoch that
/// fits the training set better makes validation worse.
#[test]
fn early_stopping_restores_best_epoch() {
    let train = gaussian_features(200, 16, 6.0, 4);
    let flipped: Vec<u8> = train.labels.iter().map(|l| 1 - l).collect();
    let val = LabeledFeatures::new(train.features.clone(), flipped).unwrap();
    for patience in [1, 3, 5] {
        let c = TrainConfig { patience, ..cfg(9) };
        let (head, history) = fit_head_split(&train, &val, &c, 8).unwrap();
        assert!(history.stopped_early);
        assert_eq!(history.best_epoch, 1);
        assert_eq!(history.epochs.len(), 1 + patience);
        let (after_one, _) = fit_head_split(&train, &val, &TrainConfig { epochs: 1, ..c }, 8).unwrap();
        assert_eq!(head, after_one);
    }
}

#[test]
fn early_stopping_counts_consecutive_stale_epochs() {
    let mut r = common::rng(12);
    for _ in 0..200 {
        let patience = r.random_range(1..=6);
        let mut es = EarlyStopping::new(patience);
        let (mut best, mut best_epoch, mut stale) = (f64::INFINITY, 0, 0);
        for epoch in 1..=40 {
            // coarse values so ties happen; a tie is not an improvement
            let loss = r.random_range(0..8) as f64;
            let v = es.observe(epoch, loss);
            if loss < best {
                best = loss;
                best_epoch = epoch;
                stale = 0;
                assert_eq!(v, Verdict::Improved);
            } else {
                stale += 1;
                assert_eq!(
                    v,
                    if stale >= patience {
                        Verdict::Stop
                    } else {
                        Verdict::NoImprovement
                    }
                );
                if v == Verdict::Stop {
                    break;
                }
            }
            assert_eq!(es.best_epoch(), Some(best_epoch));
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let data = gaussian_features(40, 4, 4.0, 5);
    for bad in [
        TrainConfig {
            batch_size: 0,
            ..cfg(0)
        },
        TrainConfig {
            learning_rate: 0.0,
            ..cfg(0)
        },
        TrainConfig { split: 1.0, ..cfg(0) },
        TrainConfig { epochs: 0, ..cfg(0) },
    ] {
        assert!(fit_head(&data, &bad, 4).is_err(), "{bad:?}");
    }
}
