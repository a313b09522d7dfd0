use std::fmt;
use std::str::FromStr;

use ecgstress_ml::{
    fit_boost, fit_forest, fit_knn, fit_lda, fit_svm, fit_tree, BoostConfig, Dataset,
    ForestParams, Growth, Kernel, MlError, SvmParams, TrainedModel, TreeParams,
};
use serde::{Deserialize, Serialize};

/// The ten compared classifiers, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classifier {
    Knn,
    Svm,
    Lda,
    Dt,
    Rf,
    XgBoost,
    LightGbm,
    CatBoost,
    Cnn,
    Lstm,
}

impl Classifier {
    pub const ALL: [Classifier; 10] = [
        Classifier::Knn,
        Classifier::Svm,
        Classifier::Lda,
        Classifier::Dt,
        Classifier::Rf,
        Classifier::XgBoost,
        Classifier::LightGbm,
        Classifier::CatBoost,
        Classifier::Cnn,
        Classifier::Lstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Knn => "KNN",
            Classifier::Svm => "SVM",
            Classifier::Lda => "LDA",
            Classifier::Dt => "DT",
            Classifier::Rf => "RF",
            Classifier::XgBoost => "XgBoost",
            Classifier::LightGbm => "LightGBM",
            Classifier::CatBoost => "CatBoost",
            Classifier::Cnn => "CNN",
            Classifier::Lstm => "LSTM",
        }
    }

    /// Trains on raw ECG windows rather than HRV features.
    pub fn is_network(self) -> bool {
        matches!(self, Classifier::Cnn | Classifier::Lstm)
    }

    pub fn growth(self) -> Option<Growth> {
        match self {
            Classifier::XgBoost => Some(Growth::LevelWise),
            Classifier::LightGbm => Some(Growth::LeafWiseHistogram),
            Classifier::CatBoost => Some(Growth::ObliviousOrdered),
            _ => None,
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Classifier::ALL
            .into_iter()
            .find(|c| c.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "tree" => Some(Classifier::Dt),
                "forest" => Some(Classifier::Rf),
                "xgb" => Some(Classifier::XgBoost),
                "lgbm" => Some(Classifier::LightGbm),
                _ => None,
            })
            .ok_or_else(|| format!("unknown classifier `{s}`"))
    }
}

/// Features tried per forest split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mtry {
    Sqrt,
    Half,
}

impl Mtry {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            Mtry::Sqrt => ((d as f64).sqrt().round() as usize).max(1),
            Mtry::Half => (d / 2).max(1),
        }
    }
}

/// One hyperparameter setting of a feature-based classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Knn { k: usize },
    Svm { kernel: Kernel, c: f64 },
    Lda,
    Tree { max_depth: Option<usize> },
    Forest { n_trees: usize, mtry: Mtry },
    Boost {
        growth: Growth,
        n_trees: usize,
        learning_rate: f64,
        max_depth: usize,
    },
}

impl ModelSpec {
    pub fn fit(&self, train: &Dataset, seed: u64) -> Result<TrainedModel, MlError> {
        match *self {
            ModelSpec::Knn { k } => fit_knn(train, k),
            ModelSpec::Svm { kernel, c } => fit_svm(train, &SvmParams::new(kernel, c)),
            ModelSpec::Lda => fit_lda(train),
            ModelSpec::Tree { max_depth } => fit_tree(
                train,
                &TreeParams {
                    max_depth,
                    ..TreeParams::default()
                },
            ),
            ModelSpec::Forest { n_trees, mtry } => {
                let d = train.n_features();
                let params = ForestParams {
                    mtry: mtry.resolve(d),
                    ..ForestParams::new(n_trees, d, seed)
                };
                fit_forest(train, &params)
            }
            ModelSpec::Boost {
                growth,
                n_trees,
                learning_rate,
                max_depth,
            } => fit_boost(
                train,
                &BoostConfig {
                    n_trees,
                    learning_rate,
                    max_depth,
                    seed,
                    ..BoostConfig::new(growth)
                },
            ),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Knn { k } => write!(f, "k={k}"),
            ModelSpec::Svm { kernel, c } => match kernel {
                Kernel::Linear => write!(f, "kernel=linear C={c}"),
                Kernel::Rbf { gamma } => write!(f, "kernel=rbf gamma={gamma} C={c}"),
                Kernel::Poly { degree, coef } => {
                    write!(f, "kernel=poly degree={degree} coef={coef} C={c}")
                }
            },
            ModelSpec::Lda => f.write_str("shrinkage=1e-6"),
            ModelSpec::Tree { max_depth } => match max_depth {
                Some(d) => write!(f, "max_depth={d}"),
                None => f.write_str("max_depth=none"),
            },
            ModelSpec::Forest { n_trees, mtry } => {
                let m = match mtry {
                    Mtry::Sqrt => "sqrt",
                    Mtry::Half => "half",
                };
                write!(f, "trees={n_trees} mtry={m}")
            }
            ModelSpec::Boost {
                n_trees,
                learning_rate,
                max_depth,
                ..
            } => write!(f, "trees={n_trees} lr={learning_rate} depth={max_depth}"),
        }
    }
}
