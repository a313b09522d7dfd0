use serde::{Deserialize, Serialize};

use crate::linalg::squared_distance;
use crate::{standardize, Dataset, MlError, Model, Result, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl KnnModel {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(MlError::InvalidParameter("k must be at least 1".into()));
        }
        if k > x.len() {
            return Err(MlError::KTooLarge { k, n: x.len() });
        }
        Ok(KnnModel { k, x, y })
    }

    /// Indices of the `k` nearest rows; equal distances keep training order.
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(r, q), i))
            .collect();
        let k = self.k;
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.truncate(k);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Majority label (ties go to class 0) and the class-1 vote fraction.
    pub fn predict(&self, q: &[f64]) -> (usize, f64) {
        let ones = self.neighbors(q).iter().filter(|&&i| self.y[i] == 1).count();
        let label = usize::from(2 * ones > self.k);
        (label, ones as f64 / self.k as f64)
    }
}

pub fn fit_knn(train: &Dataset, k: usize) -> Result<TrainedModel> {
    let (scaler, xs) = standardize(train)?;
    Ok(TrainedModel {
        model: Model::Knn(KnnModel::new(xs, train.y.clone(), k)?),
        scaler,
    })
}
