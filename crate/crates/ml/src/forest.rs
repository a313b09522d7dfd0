use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tree::{build, Criterion, FeatureSampler, TreeModel, TreeParams};
use crate::{standardize, Dataset, MlError, Model, Result, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features considered at each split.
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub criterion: Criterion,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    /// `√d` features per split, bootstrap on, unlimited depth.
    pub fn new(n_trees: usize, n_features: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            mtry: ((n_features as f64).sqrt().round() as usize).max(1),
            max_depth: None,
            min_leaf: 1,
            criterion: Criterion::Gini,
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    /// Each tree draws from its own ChaCha stream (`stream = tree index`), so
    /// the result does not depend on how trees are scheduled across threads.
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &ForestParams) -> Result<Self> {
        let d = x.first().map_or(0, Vec::len);
        if params.n_trees == 0 {
            return Err(MlError::InvalidParameter("n_trees must be at least 1".into()));
        }
        if params.mtry == 0 || params.mtry > d {
            return Err(MlError::InvalidParameter(format!(
                "mtry must be in 1..={d}, got {}",
                params.mtry
            )));
        }
        if x.len() < 2 {
            return Err(MlError::DegenerateData("a forest needs at least 2 rows".into()));
        }
        let tree_params = TreeParams {
            criterion: params.criterion,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf.max(1),
        };
        let n = x.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    r.sort_unstable();
                    r
                } else {
                    (0..n).collect()
                };
                let sampler = FeatureSampler {
                    rng: &mut rng,
                    mtry: params.mtry,
                };
                build(x, y, rows, &tree_params, Some(sampler))
            })
            .collect();
        Ok(ForestModel { trees })
    }

    /// Majority vote (ties to class 0) and the class-1 vote fraction.
    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        let ones = self.trees.iter().filter(|t| t.predict(x).0 == 1).count();
        let label = usize::from(2 * ones > self.trees.len());
        (label, ones as f64 / self.trees.len() as f64)
    }
}

pub fn fit_forest(train: &Dataset, params: &ForestParams) -> Result<TrainedModel> {
    let (scaler, xs) = standardize(train)?;
    Ok(TrainedModel {
        model: Model::Forest(ForestModel::fit(&xs, &train.y, params)?),
        scaler,
    })
}
