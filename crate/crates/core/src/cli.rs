//! Command surface: `visualize`, `train`, `predict`, `evaluate`.
//!
//! Each command returns the text it prints so the binary stays a thin
//! wrapper and the commands can be driven in-process.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::data::{self, class_name, DatasetManifest};
use crate::error::{Error, Result};
use crate::eval::{confusion, Report};
use crate::imgproc::{
    apply_colormap, canny, gaussian_blur, read_pnm, resize_bilinear, to_grayscale, write_pnm, CannyConfig,
    GaussianSpec, ImageU8,
};
use crate::nn::{init_backbone_random, ModelConfig, WeightStore, HIDDEN_DIM, INPUT_SIZE};
use crate::numerics::Tensor;
use crate::train::{evaluate_head, extract_features, fit_head, predicted_label, stratified_split, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tumorscan",
    version,
    about = "Brain-MRI tumor detection with a MobileNet-style classifier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the grayscale, blurred, thermal and edge panels for one image.
    Visualize(VisualizeArgs),
    /// Train the classification head on a frozen backbone.
    Train(TrainArgs),
    /// Classify one image.
    Predict(PredictArgs),
    /// Confusion matrix and metrics on the held-out split.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Gaussian standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Gaussian kernel side length (odd).
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    /// Canny lower hysteresis threshold.
    #[arg(long = "t-low", default_value_t = 20.0)]
    pub t_low: f64,
    /// Canny upper hysteresis threshold.
    #[arg(long = "t-high", default_value_t = 20.0)]
    pub t_high: f64,
}

impl FilterArgs {
    fn specs(&self) -> Result<(GaussianSpec, CannyConfig)> {
        let g = GaussianSpec::new(self.kernel, self.sigma)?;
        Ok((g, CannyConfig::new(self.t_low, self.t_high, g)?))
    }
}

#[derive(Debug, Clone, Args)]
pub struct VisualizeArgs {
    /// Input PGM/PPM image.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    #[arg(long = "batch-size", default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Epochs without validation-loss improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Training fraction of the stratified split.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Dataset root, manifest CSV, or `synthetic:N` (N images per class).
    #[arg(long)]
    pub data: DataSource,
    /// Backbone weight file or `random:SEED`.
    #[arg(long)]
    pub backbone: BackboneSource,
    /// Output weight file (backbone + trained head).
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV path [default: <out> with extension `history.csv`].
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Seed for synthetic data, the split, head init and batch order.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Also write the blurred, thermal and edge panels.
    #[arg(long)]
    pub visualize: bool,
    /// Where panels go with --visualize.
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub filters: FilterArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Dataset root, manifest CSV, or `synthetic:N`.
    #[arg(long)]
    pub data: DataSource,
    #[arg(long)]
    pub weights: PathBuf,
    /// JSON report output path.
    #[arg(long)]
    pub report: PathBuf,
    /// Seed of the split to reproduce (use the training seed).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training fraction of the split to reproduce.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Evaluate every sample instead of the held-out split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Synthetic(usize),
    Directory(PathBuf),
    Manifest(PathBuf),
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(n) = s.strip_prefix("synthetic:") {
            let n: usize = n.parse().map_err(|_| format!("bad synthetic count {n:?}"))?;
            if n == 0 {
                return Err("synthetic count must be ≥ 1".into());
            }
            return Ok(DataSource::Synthetic(n));
        }
        let p = PathBuf::from(s);
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Ok(DataSource::Manifest(p))
        } else {
            Ok(DataSource::Directory(p))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackboneSource {
    Random(u64),
    File(PathBuf),
}

impl FromStr for BackboneSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.strip_prefix("random:") {
            Some(seed) => seed
                .parse()
                .map(BackboneSource::Random)
                .map_err(|_| format!("bad backbone seed {seed:?}")),
            None => Ok(BackboneSource::File(PathBuf::from(s))),
        }
    }
}

/// Preprocessed network inputs with labels, in dataset order.
pub struct LoadedData {
    pub tensors: Vec<Tensor>,
    pub labels: Vec<u8>,
    pub warnings: Vec<String>,
}

pub fn load_data(source: &DataSource, seed: u64) -> Result<LoadedData> {
    let from_manifest = |m: DatasetManifest| -> Result<LoadedData> {
        let samples = m.entries.iter().map(data::load_sample).collect::<Result<Vec<_>>>()?;
        Ok(LoadedData {
            labels: samples.iter().map(|s| s.label).collect(),
            tensors: samples.into_iter().map(|s| s.tensor).collect(),
            warnings: m.warnings,
        })
    };
    match source {
        DataSource::Synthetic(n) => {
            let set = data::generate_synthetic(*n, seed)?;
            Ok(LoadedData {
                tensors: set.iter().map(|s| data::preprocess(&s.image)).collect::<Result<_>>()?,
                labels: set.iter().map(|s| s.label).collect(),
                warnings: Vec::new(),
            })
        }
        DataSource::Directory(root) => from_manifest(at_path(root, data::scan_dataset(root))?),
        DataSource::Manifest(path) => from_manifest(at_path(path, DatasetManifest::read_csv(path))?),
    }
}

pub fn load_backbone(source: &BackboneSource, model: &ModelConfig) -> Result<WeightStore> {
    let store = match source {
        BackboneSource::Random(seed) => init_backbone_random(model, *seed),
        BackboneSource::File(path) => at_path(path, WeightStore::load_file(path))?,
    };
    model.check_weights(&store, 0..model.frozen_prefix())?;
    Ok(store)
}

/// The visualization panels for one image.
pub struct Panels {
    /// Grayscale, resized to the network input size.
    pub gray: ImageU8,
    pub blurred: ImageU8,
    pub thermal: ImageU8,
    pub edges: ImageU8,
}

/// Applies blur, pseudothermal colormap and Canny independently to the
/// preprocessed grayscale image.
pub fn make_panels(img: &ImageU8, gaussian: &GaussianSpec, canny_cfg: &CannyConfig) -> Result<Panels> {
    let gray = resize_bilinear(&to_grayscale(img), INPUT_SIZE, INPUT_SIZE)?;
    Ok(Panels {
        blurred: gaussian_blur(&gray, gaussian)?,
        thermal: apply_colormap(&gray)?,
        edges: canny(&gray, canny_cfg)?,
        gray,
    })
}

/// Prefixes I/O errors with the path involved.
fn at_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_visualize(args: &VisualizeArgs) -> Result<String> {
    let (g, c) = args.filters.specs()?;
    let panels = make_panels(&at_path(&args.input, read_pnm(&args.input))?, &g, &c)?;
    ensure_dir(&args.out_dir)?;
    let mut out = String::new();
    for (name, img) in [
        ("gray.pgm", &panels.gray),
        ("blurred.pgm", &panels.blurred),
        ("thermal.ppm", &panels.thermal),
        ("edges.pgm", &panels.edges),
    ] {
        let path = args.out_dir.join(name);
        write_pnm(&path, img)?;
        writeln!(out, "wrote {}", path.display()).expect("write to String");
    }
    Ok(out)
}

pub fn default_history_path(out: &Path) -> PathBuf {
    out.with_extension("history.csv")
}

pub fn cmd_train(args: &TrainArgs) -> Result<String> {
    let model = ModelConfig::mobilenet_v1();
    let cfg = TrainConfig {
        batch_size: args.hyper.batch_size,
        epochs: args.hyper.epochs,
        learning_rate: args.hyper.lr,
        patience: args.hyper.patience,
        split: args.hyper.split,
        seed: args.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let mut weights = load_backbone(&args.backbone, &model)?;
    let data = load_data(&args.data, args.seed)?;
    let mut out = String::new();
    for w in &data.warnings {
        writeln!(out, "warning: {w}").expect("write to String");
    }
    let positives = data.labels.iter().filter(|&&l| l == 1).count();
    writeln!(
        out,
        "loaded {} images ({positives} tumor, {} no tumor)",
        data.labels.len(),
        data.labels.len() - positives
    )
    .expect("write to String");

    let features = extract_features(&model, &weights, &data.tensors, &data.labels)?;
    let fit = fit_head(&features, &cfg, HIDDEN_DIM)?;
    let val = features.subset(&fit.val_idx);
    let preds = val
        .features
        .iter()
        .map(|x| fit.head.probabilities(x).map(|p| predicted_label(&widen(&p))))
        .collect::<Result<Vec<_>>>()?;
    let report = Report::new(&confusion(&preds, &val.labels)?)?;
    let (val_loss, val_acc) = evaluate_head(&fit.head, &val)?;

    fit.head.write_to(&mut weights)?;
    weights.save_file(&args.out)?;
    let history_path = args.history.clone().unwrap_or_else(|| default_history_path(&args.out));
    fs::write(&history_path, fit.history.to_csv())?;

    let h = &fit.history;
    writeln!(
        out,
        "epochs run: {} (best {}{})",
        h.epochs.len(),
        h.best_epoch,
        if h.stopped_early { ", stopped early" } else { "" }
    )
    .expect("write to String");
    writeln!(out, "validation loss: {val_loss:.4}").expect("write to String");
    writeln!(out, "validation accuracy: {val_acc:.4}").expect("write to String");
    writeln!(out, "{report}").expect("write to String");
    writeln!(out, "wrote {}", args.out.display()).expect("write to String");
    writeln!(out, "wrote {}", history_path.display()).expect("write to String");
    Ok(out)
}

fn widen(p: &Tensor) -> Vec<f64> {
    p.data().iter().map(|&v| v as f64).collect()
}

fn load_classifier(path: &Path, model: &ModelConfig) -> Result<WeightStore> {
    let weights = at_path(path, WeightStore::load_file(path))?;
    model.check_weights(&weights, 0..model.layers().len())?;
    Ok(weights)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<String> {
    let model = ModelConfig::mobilenet_v1();
    let weights = load_classifier(&args.weights, &model)?;
    let img = at_path(&args.input, read_pnm(&args.input))?;
    let probs = widen(&model.forward(&weights, &data::preprocess(&img)?)?);
    let label = predicted_label(&probs);
    let mut out = String::new();
    writeln!(out, "prediction: {}", class_name(label)).expect("write to String");
    writeln!(out, "p(no tumor): {:.4}", probs[0]).expect("write to String");
    writeln!(out, "p(tumor): {:.4}", probs[1]).expect("write to String");
    if args.visualize {
        let (g, c) = args.filters.specs()?;
        let panels = make_panels(&img, &g, &c)?;
        ensure_dir(&args.out_dir)?;
        for (name, img) in [
            ("blurred.pgm", &panels.blurred),
            ("thermal.ppm", &panels.thermal),
            ("edges.pgm", &panels.edges),
        ] {
            let path = args.out_dir.join(name);
            write_pnm(&path, img)?;
            writeln!(out, "wrote {}", path.display()).expect("write to String");
        }
    }
    Ok(out)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let model = ModelConfig::mobilenet_v1();
    let weights = load_classifier(&args.weights, &model)?;
    let data = load_data(&args.data, args.seed)?;
    let idx: Vec<usize> = if args.all {
        (0..data.labels.len()).collect()
    } else {
        if !(args.split > 0.0 && args.split < 1.0) {
            return Err(Error::Config(format!("split {} outside (0, 1)", args.split)));
        }
        stratified_split(&data.labels, args.split, args.seed)?.1
    };
    let mut preds = Vec::with_capacity(idx.len());
    for &i in &idx {
        preds.push(predicted_label(&widen(&model.forward(&weights, &data.tensors[i])?)));
    }
    let truth: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
    let report = Report::new(&confusion(&preds, &truth)?)?;
    fs::write(&args.report, report.to_json() + "\n")?;
    let mut out = String::new();
    writeln!(out, "evaluated {} samples", idx.len()).expect("write to String");
    writeln!(out, "{report}").expect("write to String");
    writeln!(out, "wrote {}", args.report.display()).expect("write to String");
    Ok(out)
}

/// Process exit status for a failed command: 3 for numeric failures,
/// 2 for everything else (usage, I/O, format, lookup).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Visualize(a) => cmd_visualize(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn parses_sources() {
        assert_eq!(
            "synthetic:200".parse::<DataSource>().unwrap(),
            DataSource::Synthetic(200)
        );
        assert!("synthetic:0".parse::<DataSource>().is_err());
        assert!("synthetic:x".parse::<DataSource>().is_err());
        assert_eq!(
            "m.csv".parse::<DataSource>().unwrap(),
            DataSource::Manifest("m.csv".into())
        );
        assert_eq!(
            "data/".parse::<DataSource>().unwrap(),
            DataSource::Directory("data/".into())
        );
        assert_eq!(
            "random:42".parse::<BackboneSource>().unwrap(),
            BackboneSource::Random(42)
        );
        assert_eq!(
            "w.mnwt".parse::<BackboneSource>().unwrap(),
            BackboneSource::File("w.mnwt".into())
        );
    }

    #[test]
    fn help_shows_defaults() {
        let mut cmd = Cli::command();
        let train = cmd.find_subcommand_mut("train").unwrap().render_long_help().to_string();
        for needle in [
            "--batch-size",
            "[default: 32]",
            "[default: 50]",
            "[default: 0.0001]",
            "[default: 5]",
            "[default: 0.8]",
        ] {
            assert!(train.contains(needle), "train help lacks {needle}\n{train}");
        }
        let vis = cmd
            .find_subcommand_mut("visualize")
            .unwrap()
            .render_long_help()
            .to_string();
        for needle in [
            "--sigma",
            "[default: 1]",
            "--kernel",
            "[default: 5]",
            "--t-low",
            "[default: 20]",
            "--t-high",
        ] {
            assert!(vis.contains(needle), "visualize help lacks {needle}\n{vis}");
        }
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 2);
    }
}
