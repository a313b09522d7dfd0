use serde::{Deserialize, Serialize};

use crate::{EvalError, Result};

/// Binary confusion counts with `Stressed` (class 1) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(pred: &[usize], truth: &[usize]) -> Self {
        assert_eq!(pred.len(), truth.len(), "prediction/truth length mismatch");
        let mut cm = ConfusionMatrix::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with class 0 treated as positive.
    pub fn flipped(&self) -> Self {
        ConfusionMatrix {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 of the positive class. F1 is computed as
/// `2tp / (2tp + fp + fn)`, which equals the harmonic mean of precision and
/// recall but needs only one rounding.
fn positive_class(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    (
        ratio(cm.tp, cm.tp + cm.fp),
        ratio(cm.tp, cm.tp + cm.fn_),
        ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
    )
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let (precision, recall, f1) = positive_class(cm);
    let (p0, r0, f0) = positive_class(&cm.flipped());
    Ok(Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
        macro_precision: (precision + p0) / 2.0,
        macro_recall: (recall + r0) / 2.0,
        macro_f1: (f1 + f0) / 2.0,
    })
}
