use std::collections::{BTreeMap, BTreeSet};

use ecgstress_ml::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{EvalError, Result};

/// Row indices of a hold-out split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Rows stratified by (label, activity).
    Row,
    /// Whole subjects held out.
    Subject,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Row indices grouped by (label, activity), strata in sorted key order and
/// rows ascending within each.
fn strata(data: &Dataset) -> BTreeMap<(usize, String), Vec<usize>> {
    let mut out: BTreeMap<(usize, String), Vec<usize>> = BTreeMap::new();
    for (i, (&y, (_, activity))) in data.y.iter().zip(&data.groups).enumerate() {
        out.entry((y, activity.clone())).or_default().push(i);
    }
    out
}

fn check_frac(test_frac: f64) -> Result<()> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(EvalError::InvalidParameter(format!(
            "test_frac must lie in (0, 1), got {test_frac}"
        )));
    }
    Ok(())
}

/// Shuffles each (label, activity) stratum and sends `round(test_frac·size)`
/// of it, clamped to `[1, size−1]`, to the test side.
pub fn stratified_split(data: &Dataset, test_frac: f64, seed: u64) -> Result<Split> {
    check_frac(test_frac)?;
    data.validate()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (ordinal, ((label, activity), mut rows)) in strata(data).into_iter().enumerate() {
        let size = rows.len();
        if size < 2 {
            return Err(EvalError::StratumTooSmall {
                label,
                activity,
                size,
            });
        }
        rows.shuffle(&mut stream_rng(seed, ordinal as u64));
        let n_test = ((test_frac * size as f64).round() as usize).clamp(1, size - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Holds out `round(test_frac·subjects)` whole subjects, clamped so both
/// sides keep at least one subject.
pub fn subject_split(data: &Dataset, test_frac: f64, seed: u64) -> Result<Split> {
    check_frac(test_frac)?;
    data.validate()?;
    let mut subjects: Vec<&str> = data
        .groups
        .iter()
        .map(|(s, _)| s.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if subjects.len() < 2 {
        return Err(EvalError::InvalidParameter(format!(
            "subject split needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    subjects.shuffle(&mut stream_rng(seed, 0));
    let n = subjects.len();
    let n_test = ((test_frac * n as f64).round() as usize).clamp(1, n - 1);
    let held: BTreeSet<&str> = subjects[..n_test].iter().copied().collect();
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| held.contains(data.groups[i].0.as_str()));
    Ok(Split { train, test })
}

/// Validation folds for stratified k-fold CV. Each stratum is shuffled and
/// dealt round-robin, continuing from where the previous stratum stopped so
/// fold sizes differ by at most one. Every row lands in exactly one fold.
pub fn stratified_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > data.len() {
        return Err(EvalError::InvalidParameter(format!(
            "need 2 <= k <= {} rows, got k = {k}",
            data.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (ordinal, (_, mut rows)) in strata(data).into_iter().enumerate() {
        rows.shuffle(&mut stream_rng(seed, 1 << 32 | ordinal as u64));
        for r in rows {
            folds[next].push(r);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(labels: &[usize], activities: &[&str]) -> Dataset {
        let mut d = Dataset::new(labels.iter().map(|&y| vec![y as f64]).collect(), labels.to_vec())
            .unwrap();
        d.groups = activities
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("s{}", i % 3), a.to_string()))
            .collect();
        d
    }

    #[test]
    fn singleton_stratum_is_rejected() {
        let d = data(&[0, 0, 1], &["a", "a", "a"]);
        assert!(matches!(
            stratified_split(&d, 0.2, 1),
            Err(EvalError::StratumTooSmall { label: 1, size: 1, .. })
        ));
    }

    #[test]
    fn subject_split_keeps_subjects_whole() {
        let d = data(&[0, 1, 0, 1, 0, 1, 0, 1, 0], &["a"; 9]);
        let s = subject_split(&d, 0.34, 3).unwrap();
        let subj = |idx: &[usize]| -> BTreeSet<String> {
            idx.iter().map(|&i| d.groups[i].0.clone()).collect()
        };
        assert!(subj(&s.train).is_disjoint(&subj(&s.test)));
        assert_eq!(s.train.len() + s.test.len(), 9);
    }
}
