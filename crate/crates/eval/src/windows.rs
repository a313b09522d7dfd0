//! Glue between feature tables, ECG records and the evaluation inputs.

use ecgstress_core::hrv::centered_window;
use ecgstress_core::{EcgRecord, FeatureRow};
use ecgstress_ml::Dataset;

use crate::{EvalError, Result};

/// Labeled rows as a dataset, plus the index of each kept row in `rows`.
/// Unlabeled rows are dropped with a warning.
pub fn dataset_from_rows(rows: &[FeatureRow]) -> Result<(Dataset, Vec<usize>)> {
    let mut kept = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut groups = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let Some(class) = row.label.class() else {
            continue;
        };
        kept.push(i);
        x.push(row.features.to_array().to_vec());
        y.push(class);
        groups.push((row.subject_id.clone(), row.activity.to_string()));
    }
    let dropped = rows.len() - kept.len();
    if dropped > 0 {
        log::warn!("{dropped} unlabeled row(s) excluded from training and evaluation");
    }
    let data = Dataset {
        feature_names: ecgstress_core::hrv::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        x,
        y,
        groups,
    };
    data.validate()?;
    Ok((data, kept))
}

/// Raw samples of a `width_s`-second window centered on the midpoint of
/// segment `segment` (of `n_segments`), shifted inward at the record edges.
pub fn raw_window(
    record: &EcgRecord,
    segment: usize,
    n_segments: usize,
    width_s: f64,
) -> Result<Vec<f64>> {
    let len = record.len();
    if n_segments == 0 || segment >= n_segments || len < n_segments {
        return Err(EvalError::InvalidParameter(format!(
            "segment {segment} of {n_segments} in a {len}-sample record"
        )));
    }
    let width = len / n_segments;
    let mid = (segment * width) as f64 / record.fs + width as f64 / (2.0 * record.fs);
    let (lo, hi) = centered_window(mid, width_s, record.duration());
    let a = ((lo * record.fs).round() as usize).min(len - 1);
    let b = ((hi * record.fs).round() as usize).clamp(a + 1, len);
    Ok(record.samples[a..b].to_vec())
}
