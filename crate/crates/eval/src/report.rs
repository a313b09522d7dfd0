use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::grid::CvRow;
use crate::metrics::{ConfusionMatrix, Metrics};
use crate::split::SplitMode;
use crate::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub classifier: Classifier,
    pub name: String,
    /// Selected hyperparameters.
    pub selected: String,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    /// Grid-search table; empty for the networks.
    pub cv: Vec<CvRow>,
    /// Per-epoch training loss; empty for feature-based models.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub split: SplitMode,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<ReportRow>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn row(&self, c: Classifier) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.classifier == c)
    }

    /// Comparison table: positive-class precision, recall and F1, then accuracy.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("Classifier,Precision,Recall,F1 Score,Accuracy\n");
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                s,
                "{},{:.4},{:.4},{:.4},{:.4}",
                r.name, m.precision, m.recall, m.f1, m.accuracy
            );
        }
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}
