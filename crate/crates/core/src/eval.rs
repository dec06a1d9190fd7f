//! Confusion matrix and the derived binary-classification metrics.
//! The positive class is label 1 (tumor).

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts read with label 0 as the positive class.
    pub fn swapped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

/// Tallies predictions against ground truth.
pub fn confusion(preds: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Precondition("confusion matrix of zero samples".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &t)) in preds.iter().zip(truth).enumerate() {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            (0, 0) => cm.tn += 1,
            _ => {
                return Err(Error::Precondition(format!(
                    "sample {i}: labels must be 0 or 1, got {p}/{t}"
                )))
            }
        }
    }
    Ok(cm)
}

/// Precision, recall and F1 are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    if cm.total() == 0 {
        return Err(Error::Precondition("metrics of an empty confusion matrix".into()));
    }
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
    })
}

/// Machine-readable report; keys serialize in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
}

impl Report {
    pub fn new(cm: &ConfusionMatrix) -> Result<Self> {
        let m = metrics(cm)?;
        Ok(Report {
            tp: cm.tp,
            fp: cm.fp,
            fn_: cm.fn_,
            tn: cm.tn,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            accuracy: m.accuracy,
        })
    }

    /// Pretty JSON with keys `tp, fp, fn, tn, precision, recall, f1,
    /// accuracy`; undefined metrics are `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        writeln!(f, "                 predicted")?;
        writeln!(f, "                 tumor  no tumor")?;
        writeln!(f, "actual tumor    {:>6}  {:>8}", self.tp, self.fn_)?;
        writeln!(f, "actual no tumor {:>6}  {:>8}", self.fp, self.tn)?;
        writeln!(f)?;
        writeln!(f, "precision  {}", show(self.precision))?;
        writeln!(f, "recall     {}", show(self.recall))?;
        writeln!(f, "f1         {}", show(self.f1))?;
        write!(f, "accuracy   {:.4}", self.accuracy)
    }
}
