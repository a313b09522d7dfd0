//! Soft-margin SVM trained with SMO.
//!
//! The solver minimizes `f(α) = ½ αᵀQα − Σα` with `Q_ij = y_i y_j K(x_i, x_j)`,
//! `0 ≤ α ≤ C` and `Σ y_i α_i = 0`, picking working pairs by the maximal
//! violating pair for `i` and second-order gain for `j`.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, squared_distance};
use crate::{standardize, Dataset, MlError, Model, Result, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { degree: u32, coef: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
            Kernel::Poly { degree, coef } => (dot(a, b) + coef).powi(degree as i32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    /// Iteration cap; `None` means `max(100_000, 100·n)`.
    pub max_iter: Option<usize>,
}

impl SvmParams {
    pub fn new(kernel: Kernel, c: f64) -> Self {
        SvmParams {
            kernel,
            c,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub support: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    /// False when SMO stopped at the iteration cap.
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * self.kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }

    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        let d = self.decision(x);
        (usize::from(d > 0.0), d)
    }
}

const TAU: f64 = 1e-12;

/// Runs SMO on standardized rows, calling `observe(α)` after every update.
pub fn train_with_observer(
    x: &[Vec<f64>],
    labels: &[usize],
    params: &SvmParams,
    mut observe: impl FnMut(&[f64]),
) -> Result<SvmModel> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(MlError::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    if !(params.tol > 0.0) {
        return Err(MlError::InvalidParameter("tol must be positive".into()));
    }
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
    if y.iter().all(|&v| v == y[0]) {
        return Err(MlError::DegenerateData("SVM needs both classes".into()));
    }
    let kernel = params.kernel;
    // Full kernel matrix; training sets here are a few thousand rows at most.
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| kernel.eval(&x[i], &x[j])).collect())
        .collect();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_iter.unwrap_or((100 * n).max(100_000));
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iter = 0;
    let mut converged = false;
    while iter < max_iter {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            if in_low(alpha[t], y[t]) {
                gmin = gmin.min(-y[t] * grad[t]);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        if gmax - gmin < params.tol {
            converged = true;
            break;
        }
        // j: second-order choice among I_low violators.
        let mut best = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b > 0.0 {
                let a = (k[i][i] + k[t][t] - 2.0 * k[i][t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k[i][j];
        if y[i] != y[j] {
            let quad = (k[i][i] + k[j][j] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[i][i] + k[j][j] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[i][t] * di + y[j] * k[j][t] * dj);
        }
        observe(&alpha);
    }
    if !converged {
        log::warn!("SMO hit the iteration cap ({max_iter}) before reaching tol {}", params.tol);
    }

    // Bias: average over free vectors, else midpoint of the feasible interval.
    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };

    let (support, coef) = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| (x[t].clone(), alpha[t] * y[t]))
        .unzip();
    Ok(SvmModel {
        kernel,
        support,
        coef,
        rho,
        converged,
        iterations: iter,
    })
}

pub fn train(x: &[Vec<f64>], labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    train_with_observer(x, labels, params, |_| {})
}

pub fn fit_svm(train_set: &Dataset, params: &SvmParams) -> Result<TrainedModel> {
    let (scaler, xs) = standardize(train_set)?;
    Ok(TrainedModel {
        model: Model::Svm(train(&xs, &train_set.y, params)?),
        scaler,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_linear() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.2],
            vec![0.3, 0.9],
            vec![3.0, 3.0],
            vec![4.0, 3.5],
            vec![3.2, 4.1],
        ];
        let y = vec![0, 0, 0, 1, 1, 1];
        let m = train(&x, &y, &SvmParams::new(Kernel::Linear, 10.0)).unwrap();
        assert!(m.converged);
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(m.predict(r).0, c);
        }
    }

    #[test]
    fn xor_rbf_dual_form() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![0, 0, 1, 1];
        let kernel = Kernel::Rbf { gamma: 1.0 };
        let m = train(&x, &y, &SvmParams::new(kernel, 10.0)).unwrap();
        for (r, &c) in x.iter().zip(&y) {
            // Evaluate Σ α_i y_i K(x_i, x) − ρ directly.
            let direct: f64 = m
                .support
                .iter()
                .zip(&m.coef)
                .map(|(s, a)| a * (-squared_distance(s, r)).exp())
                .sum::<f64>()
                - m.rho;
            assert!((direct - m.decision(r)).abs() < 1e-12);
            assert_eq!(usize::from(direct > 0.0), c);
        }
    }

    #[test]
    fn rejects_bad_c() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(train(&x, &[0, 1], &SvmParams::new(Kernel::Linear, 0.0)).is_err());
    }

    #[test]
    fn iteration_cap_sets_flag() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64).cos()]).collect();
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let p = SvmParams {
            max_iter: Some(2),
            ..SvmParams::new(Kernel::Rbf { gamma: 0.5 }, 1.0)
        };
        let m = train(&x, &y, &p).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }
}
