use ecgstress_ml::Dataset;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ModelSpec;
use crate::metrics::{compute_metrics, ConfusionMatrix};
use crate::split::stratified_folds;
use crate::{EvalError, Result};

/// Tolerance under which two mean scores count as tied.
const TIE_EPS: f64 = 1e-12;

/// Cross-validation outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub spec: ModelSpec,
    pub params: String,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: Option<f64>,
    pub mean_f1: Option<f64>,
    /// Fit or prediction failure; the point is then skipped.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ModelSpec,
    pub best_index: usize,
    pub table: Vec<CvRow>,
}

fn evaluate_point(
    spec: &ModelSpec,
    data: &Dataset,
    folds: &[Vec<usize>],
    seed: u64,
) -> CvRow {
    let mut fold_accuracy = Vec::with_capacity(folds.len());
    let mut f1s = Vec::with_capacity(folds.len());
    let mut error = None;
    for (f, val) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let outcome = spec.fit(&data.subset(&train_idx), seed).and_then(|model| {
            let val_set = data.subset(val);
            model.predict_labels(&val_set.x).map(|pred| (pred, val_set.y))
        });
        match outcome {
            Ok((pred, truth)) => {
                let m = compute_metrics(&ConfusionMatrix::from_predictions(&pred, &truth))
                    .expect("validation folds are nonempty");
                fold_accuracy.push(m.accuracy);
                f1s.push(m.f1);
            }
            Err(e) => {
                error = Some(format!("fold {}: {e}", f + 1));
                break;
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ok = error.is_none();
    CvRow {
        params: spec.to_string(),
        spec: spec.clone(),
        mean_accuracy: ok.then(|| mean(&fold_accuracy)),
        mean_f1: ok.then(|| mean(&f1s)),
        fold_accuracy,
        error,
    }
}

/// Stratified k-fold CV over every grid point. The winner has the highest
/// mean accuracy; ties go to the higher mean F1 and then to the earlier
/// point. Points whose fit fails are recorded and skipped.
pub fn grid_search(grid: &[ModelSpec], data: &Dataset, k: usize, seed: u64) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(EvalError::InvalidParameter("empty grid".into()));
    }
    data.validate()?;
    let folds = stratified_folds(data, k, seed)?;
    let table: Vec<CvRow> = grid
        .par_iter()
        .map(|spec| evaluate_point(spec, data, &folds, seed))
        .collect();

    let mut best: Option<(usize, f64, f64)> = None;
    for (i, row) in table.iter().enumerate() {
        let (Some(acc), Some(f1)) = (row.mean_accuracy, row.mean_f1) else {
            log::warn!("grid point {} skipped: {}", row.params, row.error.as_deref().unwrap_or(""));
            continue;
        };
        let better = match best {
            None => true,
            Some((_, b_acc, b_f1)) => {
                acc > b_acc + TIE_EPS || ((acc - b_acc).abs() <= TIE_EPS && f1 > b_f1 + TIE_EPS)
            }
        };
        if better {
            best = Some((i, acc, f1));
        }
    }
    match best {
        Some((i, _, _)) => Ok(GridResult {
            best: grid[i].clone(),
            best_index: i,
            table,
        }),
        None => Err(EvalError::NoViablePoint(
            table
                .iter()
                .filter_map(|r| r.error.clone())
                .next()
                .unwrap_or_default(),
        )),
    }
}
