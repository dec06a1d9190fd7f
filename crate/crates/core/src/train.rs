//! Frozen-backbone head training: cached features, categorical
//! cross-entropy with analytic gradients, Adam and early stopping.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::nn::{self, ModelConfig, WeightStore, HEAD_DENSE1, HEAD_DENSE2, NUM_CLASSES};
use crate::numerics::{matvec, Tensor};

/// Hyperparameters. Defaults: batch 32, 50 epochs, Adam lr 1e-4
/// (β1 0.9, β2 0.999, ε 1e-8), patience 5, 80/20 split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub patience: usize,
    pub split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 50,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 5,
            split: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad(format!("split {} outside (0, 1)", self.split));
        }
        if self.patience == 0 {
            return bad("patience must be ≥ 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be ≥ 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("Adam coefficients out of range".into());
        }
        Ok(())
    }
}

/// Pooled backbone features with class labels (0 or 1).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledFeatures {
    pub features: Vec<Tensor>,
    pub labels: Vec<u8>,
}

impl LabeledFeatures {
    pub fn new(features: Vec<Tensor>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Precondition(format!("label {l} is not 0 or 1")));
        }
        Ok(LabeledFeatures { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.features.first().map(Tensor::len)
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledFeatures {
        LabeledFeatures {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn onehot(&self, i: usize) -> [f64; NUM_CLASSES] {
        one_hot(self.labels[i])
    }
}

pub fn one_hot(label: u8) -> [f64; NUM_CLASSES] {
    let mut t = [0.0; NUM_CLASSES];
    t[label as usize] = 1.0;
    t
}

/// Runs backbone + pooling once per image, in input order.
pub fn extract_features(
    model: &ModelConfig,
    weights: &WeightStore,
    images: &[Tensor],
    labels: &[u8],
) -> Result<LabeledFeatures> {
    let features = images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            model.features(weights, img).map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("image {i}: {m}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledFeatures::new(features, labels.to_vec())
}

/// `-Σ target_k · ln(max(pred_k, 1e-12))`.
pub fn cross_entropy(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(-pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| t * p.max(1e-12).ln())
        .sum::<f64>())
}

/// Trainable head: dense (F→H, relu) then dense (H→2). Weights are
/// `out × in` row-major, matching the network's dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// How the head was initialized; recorded in training history.
pub const HEAD_INIT: &str =
    "dense1: He-uniform sqrt(6/fan_in), bias 0; dense2: Glorot-uniform sqrt(6/(fan_in+fan_out)), bias 0; PCG64";

impl HeadParams {
    pub fn init(inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = Pcg64::seed_from_u64(seed);
        let mut uniform = |n: usize, bound: f64| -> Vec<f32> {
            let b = bound as f32;
            (0..n).map(|_| rng.random_range(-b..b)).collect()
        };
        let w1 = uniform(hidden * inputs, (6.0 / inputs as f64).sqrt());
        let w2 = uniform(NUM_CLASSES * hidden, (6.0 / (hidden + NUM_CLASSES) as f64).sqrt());
        let t = |dims: &[usize], d: Vec<f32>| Tensor::from_vec(dims, d).expect("head dims valid");
        HeadParams {
            w1: t(&[hidden, inputs], w1),
            b1: t(&[hidden], vec![0.0; hidden]),
            w2: t(&[NUM_CLASSES, hidden], w2),
            b2: t(&[NUM_CLASSES], vec![0.0; NUM_CLASSES]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w1.dims()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w1.dims()[0]
    }

    pub fn from_store(store: &WeightStore, inputs: usize, hidden: usize) -> Result<Self> {
        Ok(HeadParams {
            w1: store.require(&format!("{HEAD_DENSE1}.w"), &[hidden, inputs])?.clone(),
            b1: store.require(&format!("{HEAD_DENSE1}.b"), &[hidden])?.clone(),
            w2: store
                .require(&format!("{HEAD_DENSE2}.w"), &[NUM_CLASSES, hidden])?
                .clone(),
            b2: store.require(&format!("{HEAD_DENSE2}.b"), &[NUM_CLASSES])?.clone(),
        })
    }

    pub fn write_to(&self, store: &mut WeightStore) -> Result<()> {
        store.insert(format!("{HEAD_DENSE1}.w"), self.w1.clone())?;
        store.insert(format!("{HEAD_DENSE1}.b"), self.b1.clone())?;
        store.insert(format!("{HEAD_DENSE2}.w"), self.w2.clone())?;
        store.insert(format!("{HEAD_DENSE2}.b"), self.b2.clone())?;
        Ok(())
    }

    /// Class probabilities through the same kernels the full network uses.
    pub fn probabilities(&self, features: &Tensor) -> Result<Tensor> {
        let hidden = nn::relu(&matvec(&self.w1, features, &self.b1)?)?;
        nn::softmax(&matvec(&self.w2, &hidden, &self.b2)?)
    }

    fn tensors(&self) -> [&Tensor; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

/// Gradients of the mean cross-entropy, one flat `f64` buffer per head
/// tensor (`w1`, `b1`, `w2`, `b2`).
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// Mean batch loss at the current parameters.
    pub loss: f64,
}

impl HeadGradients {
    fn buffers(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

/// Backpropagation through dense → relu → dense → softmax/cross-entropy,
/// with the softmax and loss fused into `pred − target` at the logits.
pub fn head_gradients(batch: &LabeledFeatures, head: &HeadParams) -> Result<HeadGradients> {
    if batch.is_empty() {
        return Err(Error::Precondition("gradient of an empty batch".into()));
    }
    let (f, h) = (head.inputs(), head.hidden());
    let w1: Vec<f64> = head.w1.data().iter().map(|&v| v as f64).collect();
    let b1 = head.b1.data();
    let w2: Vec<f64> = head.w2.data().iter().map(|&v| v as f64).collect();
    let b2 = head.b2.data();
    let mut g = HeadGradients {
        w1: vec![0.0; h * f],
        b1: vec![0.0; h],
        w2: vec![0.0; NUM_CLASSES * h],
        b2: vec![0.0; NUM_CLASSES],
        loss: 0.0,
    };
    let scale = 1.0 / batch.len() as f64;
    let mut hidden = vec![0.0; h];
    for (i, feat) in batch.features.iter().enumerate() {
        if feat.len() != f {
            return Err(Error::Shape(format!(
                "feature row {i} has {} values, head expects {f}",
                feat.len()
            )));
        }
        let x: Vec<f64> = feat.data().iter().map(|&v| v as f64).collect();
        for (j, hj) in hidden.iter_mut().enumerate() {
            let row = &w1[j * f..(j + 1) * f];
            let pre = b1[j] as f64 + row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            *hj = pre.max(0.0);
        }
        let logits: Vec<f64> = (0..NUM_CLASSES)
            .map(|k| {
                b2[k] as f64
                    + w2[k * h..(k + 1) * h]
                        .iter()
                        .zip(&hidden)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let pred: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let target = batch.onehot(i);
        g.loss += scale * cross_entropy(&pred, &target)?;

        let dz: Vec<f64> = pred.iter().zip(&target).map(|(p, t)| (p - t) * scale).collect();
        for (k, &dzk) in dz.iter().enumerate() {
            g.b2[k] += dzk;
            for (gw, &hj) in g.w2[k * h..(k + 1) * h].iter_mut().zip(&hidden) {
                *gw += dzk * hj;
            }
        }
        for j in 0..h {
            if hidden[j] <= 0.0 {
                continue;
            }
            let dh: f64 = (0..NUM_CLASSES).map(|k| dz[k] * w2[k * h + j]).sum();
            g.b1[j] += dh;
            for (gw, &xv) in g.w1[j * f..(j + 1) * f].iter_mut().zip(&x) {
                *gw += dh * xv;
            }
        }
    }
    Ok(g)
}

/// First/second moment estimates per head tensor and the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn for_head(head: &HeadParams) -> Self {
        Self::new(&head.tensors().map(Tensor::len))
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    grads: &[&[f64]],
    params: &mut [Vec<f32>],
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() || grads.len() != state.m.len() {
        return Err(Error::Shape("Adam parameter/gradient groups differ".into()));
    }
    for (i, (g, p)) in grads.iter().zip(params.iter()).enumerate() {
        if g.len() != p.len() || g.len() != state.m[i].len() {
            return Err(Error::Shape(format!(
                "Adam group {i}: {} grads for {} params",
                g.len(),
                p.len()
            )));
        }
        if let Some(j) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient {} in group {i} at {j}",
                g[j]
            )));
        }
    }
    state.t += 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (i, (g, p)) in grads.iter().zip(params.iter_mut()).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let step = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + cfg.epsilon);
            p[j] = (p[j] as f64 - step) as f32;
        }
    }
    Ok(())
}

/// Indices per class shuffled with `seed`, the first `round(n·split)` of
/// each class going to training (at least one per side). Both index lists
/// come back sorted.
pub fn stratified_split(labels: &[u8], split: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = Pcg64::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in 0..NUM_CLASSES as u8 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::Dataset(format!(
                "class {class} has {} samples; a stratified split needs at least 2 per class",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let cut = ((idx.len() as f64 * split).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..cut]);
        val.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub head_init: &'static str,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// `epoch,train_loss,val_loss,val_accuracy`, one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_accuracy\n");
        for r in &self.epochs {
            writeln!(
                s,
                "{},{:.6},{:.6},{:.6}",
                r.epoch, r.train_loss, r.val_loss, r.val_accuracy
            )
            .expect("write to String");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Validation-loss watcher: improvement means strictly lower loss;
/// `patience` consecutive non-improving epochs stop training.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> Verdict {
        match self.best {
            Some((_, best)) if val_loss >= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    Verdict::Stop
                } else {
                    Verdict::NoImprovement
                }
            }
            _ => {
                self.best = Some((epoch, val_loss));
                self.stale = 0;
                Verdict::Improved
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Mean loss and accuracy (argmax, ties to class 0) of `head` on `data`.
pub fn evaluate_head(head: &HeadParams, data: &LabeledFeatures) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (i, x) in data.features.iter().enumerate() {
        let p: Vec<f64> = head.probabilities(x)?.data().iter().map(|&v| v as f64).collect();
        loss += cross_entropy(&p, &data.onehot(i))?;
        if predicted_label(&p) == data.labels[i] {
            correct += 1;
        }
    }
    let n = data.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Argmax of a two-class probability pair; a tie goes to class 0.
pub fn predicted_label(probs: &[f64]) -> u8 {
    u8::from(probs[1] > probs[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub head: HeadParams,
    pub history: TrainHistory,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
}

/// Seeded stratified split, then [`fit_head_split`].
pub fn fit_head(data: &LabeledFeatures, cfg: &TrainConfig, hidden: usize) -> Result<FitResult> {
    cfg.validate()?;
    let (train_idx, val_idx) = stratified_split(&data.labels, cfg.split, cfg.seed)?;
    let (head, history) = fit_head_split(&data.subset(&train_idx), &data.subset(&val_idx), cfg, hidden)?;
    Ok(FitResult {
        head,
        history,
        train_idx,
        val_idx,
    })
}

/// Mini-batch Adam on `train`, validating on `val` after every epoch.
/// Returns the weights of the best validation-loss epoch.
pub fn fit_head_split(
    train: &LabeledFeatures,
    val: &LabeledFeatures,
    cfg: &TrainConfig,
    hidden: usize,
) -> Result<(HeadParams, TrainHistory)> {
    cfg.validate()?;
    let dim = train
        .dim()
        .ok_or_else(|| Error::Precondition("empty training set".into()))?;
    if val.is_empty() {
        return Err(Error::Precondition("empty validation set".into()));
    }
    // separate streams for initialization and batch order
    let mut order_rng = Pcg64::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut head = HeadParams::init(dim, hidden, cfg.seed);
    let mut adam = AdamState::for_head(&head);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = head.clone();
    let mut records = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.subset(chunk);
            let g = head_gradients(&batch, &head)?;
            if !g.loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became {} in epoch {epoch}",
                    g.loss
                )));
            }
            loss_sum += g.loss * chunk.len() as f64;
            let mut params: Vec<Vec<f32>> = head.tensors().iter().map(|t| t.data().to_vec()).collect();
            adam_step(&mut adam, &g.buffers(), &mut params, cfg.learning_rate, cfg)?;
            let mut it = params.into_iter();
            let mut next = |t: &Tensor| Tensor::from_vec(t.dims(), it.next().expect("4 groups"));
            head = HeadParams {
                w1: next(&head.w1)?,
                b1: next(&head.b1)?,
                w2: next(&head.w2)?,
                b2: next(&head.b2)?,
            };
        }
        let (val_loss, val_accuracy) = evaluate_head(&head, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "validation loss became {val_loss} in epoch {epoch}"
            )));
        }
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_accuracy,
        });
        match stopper.observe(epoch, val_loss) {
            Verdict::Improved => best = head.clone(),
            Verdict::NoImprovement => {}
            Verdict::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    let history = TrainHistory {
        epochs: records,
        best_epoch: stopper.best_epoch().expect("at least one epoch ran"),
        stopped_early,
        head_init: HEAD_INIT,
    };
    Ok((best, history))
}
