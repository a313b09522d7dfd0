//! Binary classifiers over dense real-valued feature rows.
//!
//! Every `fit_*` function standardizes the training matrix, trains on the
//! standardized rows and returns a [`TrainedModel`] that carries the scaler,
//! so [`TrainedModel::predict`] takes raw feature vectors. Class 1 is the
//! positive ("stressed") class and every tie-break resolves toward class 0.

pub mod boost;
pub mod forest;
pub mod knn;
pub mod lda;
pub mod linalg;
pub mod svm;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boost::{fit_boost, BoostConfig, Growth};
pub use forest::{fit_forest, ForestParams};
pub use knn::fit_knn;
pub use lda::fit_lda;
pub use svm::{fit_svm, Kernel, SvmParams};
pub use tree::{fit_tree, Criterion, TreeParams};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("x has {rows} rows but y has {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(usize),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("class {class} has {n} rows, need at least {needed}")]
    TooFewRows { class: usize, n: usize, needed: usize },
    #[error("within-class covariance is singular")]
    SingularCovariance,
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file: {0}")]
    Persistence(String),
}

pub type Result<T> = std::result::Result<T, MlError>;

/// A labeled design matrix with per-row provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub feature_names: Vec<String>,
    /// (subject, activity) of each row.
    pub groups: Vec<(String, String)>,
}

impl Dataset {
    /// Builds a dataset with generic feature names and empty provenance.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>) -> Result<Self> {
        let d = x.first().map_or(0, Vec::len);
        let ds = Dataset {
            feature_names: (0..d).map(|i| format!("f{i}")).collect(),
            groups: vec![(String::new(), String::new()); x.len()],
            x,
            y,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(MlError::EmptyDataset);
        }
        if self.x.len() != self.y.len() {
            return Err(MlError::LengthMismatch {
                rows: self.x.len(),
                labels: self.y.len(),
            });
        }
        let d = self.n_features();
        for (r, row) in self.x.iter().enumerate() {
            if row.len() != d {
                return Err(MlError::RaggedRow {
                    row: r,
                    expected: d,
                    got: row.len(),
                });
            }
            if let Some(f) = row.iter().position(|v| !v.is_finite()) {
                return Err(MlError::NonFinite { row: r, feature: f });
            }
        }
        if let Some(&bad) = self.y.iter().find(|&&c| c > 1) {
            return Err(MlError::InvalidLabel(bad));
        }
        if self.groups.len() != self.x.len() {
            return Err(MlError::LengthMismatch {
                rows: self.x.len(),
                labels: self.groups.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            groups: idx.iter().map(|&i| self.groups[i].clone()).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for &y in &self.y {
            c[y] += 1;
        }
        c
    }
}

/// Per-feature standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant features keep 1.0.
    pub sd: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Scaler {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; d];
        for row in x {
            for ((s, v), m) in sd.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) {
                *s = 1.0;
            }
        }
        Scaler { mean, sd }
    }

    pub fn identity(d: usize) -> Scaler {
        Scaler {
            mean: vec![0.0; d],
            sd: vec![1.0; d],
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Knn,
    Svm,
    Lda,
    Tree,
    Forest,
    Boost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Knn(knn::KnnModel),
    Svm(svm::SvmModel),
    Lda(lda::LdaModel),
    Tree(tree::TreeModel),
    Forest(forest::ForestModel),
    Boost(boost::BoostModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Knn(_) => ModelKind::Knn,
            Model::Svm(_) => ModelKind::Svm,
            Model::Lda(_) => ModelKind::Lda,
            Model::Tree(_) => ModelKind::Tree,
            Model::Forest(_) => ModelKind::Forest,
            Model::Boost(_) => ModelKind::Boost,
        }
    }

    /// `(label, score)` for an already standardized row.
    pub fn predict_scaled(&self, x: &[f64]) -> (usize, f64) {
        match self {
            Model::Knn(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
            Model::Lda(m) => m.predict(x),
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Boost(m) => m.predict(x),
        }
    }
}

const FORMAT_TAG: &str = "ecgstress-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: Model,
    pub scaler: Scaler,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn n_features(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Returns the predicted class and a score: a probability for boosting,
    /// a class-1 vote fraction for KNN, trees and forests, and a signed margin
    /// for SVM and LDA.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, f64)> {
        if x.len() != self.n_features() {
            return Err(MlError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        if let Some(f) = x.iter().position(|v| !v.is_finite()) {
            return Err(MlError::NonFinite { row: 0, feature: f });
        }
        Ok(self.model.predict_scaled(&self.scaler.transform_row(x)))
    }

    pub fn predict_labels(&self, x: &[Vec<f64>]) -> Result<Vec<usize>> {
        x.iter().map(|r| self.predict(r).map(|p| p.0)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&Envelope {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| MlError::Persistence(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: Envelope =
            serde_json::from_str(text).map_err(|e| MlError::Persistence(e.to_string()))?;
        if env.format != FORMAT_TAG || env.version != FORMAT_VERSION {
            return Err(MlError::Persistence(format!(
                "unsupported format {} v{}",
                env.format, env.version
            )));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| MlError::Persistence(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MlError::Persistence(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Validates `train` and returns its fitted scaler and standardized rows.
pub(crate) fn standardize(train: &Dataset) -> Result<(Scaler, Vec<Vec<f64>>)> {
    train.validate()?;
    let scaler = Scaler::fit(&train.x);
    let xs = scaler.transform(&train.x);
    Ok((scaler, xs))
}

/// Fraction of matching labels.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Mean binary cross-entropy of probabilities `p` against labels `y`.
pub fn log_loss(p: &[f64], y: &[usize]) -> f64 {
    let eps = 1e-15;
    p.iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_standardizes() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Scaler::fit(&x);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.sd, vec![1.0, 1.0]);
        assert_eq!(s.transform_row(&[3.0, 7.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(Dataset::new(vec![], vec![]), Err(MlError::EmptyDataset)));
        assert!(matches!(
            Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1]),
            Err(MlError::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            Dataset::new(vec![vec![f64::NAN]], vec![0]),
            Err(MlError::NonFinite { .. })
        ));
        assert!(matches!(
            Dataset::new(vec![vec![1.0]], vec![2]),
            Err(MlError::InvalidLabel(2))
        ));
    }
}
