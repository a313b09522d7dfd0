use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, cholesky_solve, dot};
use crate::{standardize, Dataset, MlError, Model, Result, TrainedModel};

/// Two-class LDA reduced to a linear rule `w·x + b > 0 → class 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LdaModel {
    /// Pooled within-class covariance with shrinkage `1e-6·trace/d` on the
    /// diagonal; class priors from row counts.
    pub fn fit(x: &[Vec<f64>], y: &[usize]) -> Result<Self> {
        let d = x.first().map_or(0, Vec::len);
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; d], vec![0.0; d]];
        for (row, &c) in x.iter().zip(y) {
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            if counts[c] < 2 {
                return Err(MlError::TooFewRows {
                    class: c,
                    n: counts[c],
                    needed: 2,
                });
            }
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut cov = vec![vec![0.0; d]; d];
        for (row, &c) in x.iter().zip(y) {
            let dev: Vec<f64> = row.iter().zip(&means[c]).map(|(v, m)| v - m).collect();
            for i in 0..d {
                for j in 0..=i {
                    cov[i][j] += dev[i] * dev[j];
                }
            }
        }
        let dof = (x.len() - 2) as f64;
        for i in 0..d {
            for j in 0..=i {
                cov[i][j] /= dof;
                cov[j][i] = cov[i][j];
            }
        }
        let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
        let eps = 1e-6 * trace / d as f64;
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] += eps;
        }
        let l = cholesky(&cov).ok_or(MlError::SingularCovariance)?;
        let s_inv_m0 = cholesky_solve(&l, &means[0]);
        let s_inv_m1 = cholesky_solve(&l, &means[1]);
        let w: Vec<f64> = s_inv_m1.iter().zip(&s_inv_m0).map(|(a, b)| a - b).collect();
        let prior = (counts[1] as f64 / counts[0] as f64).ln();
        let b = -0.5 * (dot(&means[1], &s_inv_m1) - dot(&means[0], &s_inv_m0)) + prior;
        Ok(LdaModel { w, b })
    }

    /// `δ₁(x) − δ₀(x)`: positive means class 1, zero goes to class 0.
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        let m = self.margin(x);
        (usize::from(m > 0.0), m)
    }
}

pub fn fit_lda(train: &Dataset) -> Result<TrainedModel> {
    let (scaler, xs) = standardize(train)?;
    Ok(TrainedModel {
        model: Model::Lda(LdaModel::fit(&xs, &train.y)?),
        scaler,
    })
}
