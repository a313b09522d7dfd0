//! Greedy binary CART classifier.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{standardize, Dataset, MlError, Model, Result, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    /// Impurity of a node with the given class counts.
    pub fn impurity(self, counts: [usize; 2]) -> f64 {
        let n = (counts[0] + counts[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let p = [counts[0] as f64 / n, counts[1] as f64 / n];
        match self {
            Criterion::Gini => 1.0 - p[0] * p[0] - p[1] * p[1],
            Criterion::Entropy => -p
                .iter()
                .filter(|&&q| q > 0.0)
                .map(|&q| q * q.log2())
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Nodes in pre-order; node 0 is the root. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
}

/// Improvements within this margin count as ties.
pub const GAIN_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// Midpoint of two consecutive distinct values that still separates them.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Best split of the rows `idx` over `features` (scanned in the given order).
///
/// Candidates are midpoints between consecutive distinct sorted values. The
/// decrease is `I(parent) − (n_L·I(L) + n_R·I(R))/n`; a later candidate wins
/// only if it beats the incumbent by more than [`GAIN_TIE_EPS`], so ties keep
/// the lower feature index and then the lower threshold.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    idx: &[usize],
    features: &[usize],
    params: &TreeParams,
) -> Option<SplitChoice> {
    let mut total = [0usize; 2];
    for &i in idx {
        total[y[i]] += 1;
    }
    let n = idx.len() as f64;
    let parent = params.criterion.impurity(total);
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = [0usize; 2];
        for k in 0..order.len() - 1 {
            left[y[order[k]]] += 1;
            let (v, next) = (x[order[k]][f], x[order[k + 1]][f]);
            if v == next {
                continue;
            }
            let n_left = k + 1;
            if n_left < params.min_leaf || order.len() - n_left < params.min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let child = (n_left as f64 * params.criterion.impurity(left)
                + (order.len() - n_left) as f64 * params.criterion.impurity(right))
                / n;
            let decrease = parent - child;
            if best.map_or(true, |b| decrease > b.decrease + GAIN_TIE_EPS) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(v, next),
                    decrease,
                });
            }
        }
    }
    best
}

/// Per-node feature subsampling for forests.
pub(crate) struct FeatureSampler<'a, R: Rng> {
    pub rng: &'a mut R,
    pub mtry: usize,
}

pub(crate) fn build<R: Rng>(
    x: &[Vec<f64>],
    y: &[usize],
    rows: Vec<usize>,
    params: &TreeParams,
    mut sampler: Option<FeatureSampler<'_, R>>,
) -> TreeModel {
    let d = x.first().map_or(0, Vec::len);
    let all: Vec<usize> = (0..d).collect();
    let mut nodes = Vec::new();
    // Explicit stack of (rows, depth, slot to patch in the parent).
    let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> = vec![(rows, 0, None)];
    while let Some((idx, depth, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some((p, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        let mut counts = [0usize; 2];
        for &i in &idx {
            counts[y[i]] += 1;
        }
        let pure = counts[0] == 0 || counts[1] == 0;
        let depth_ok = params.max_depth.map_or(true, |m| depth < m);
        let split = if !pure && depth_ok && idx.len() >= 2 * params.min_leaf.max(1) {
            let features = match sampler.as_mut() {
                Some(s) if s.mtry < d => {
                    let mut f = sample(s.rng, d, s.mtry).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => all.clone(),
            };
            best_split(x, y, &idx, &features, params)
        } else {
            None
        };
        match split {
            Some(s) => {
                nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: 0,
                    right: 0,
                });
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                // Right pushed first so the left subtree is laid out next.
                stack.push((r, depth + 1, Some((id, false))));
                stack.push((l, depth + 1, Some((id, true))));
            }
            None => nodes.push(Node::Leaf { counts }),
        }
    }
    TreeModel { nodes }
}

impl TreeModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &TreeParams) -> Result<Self> {
        if x.len() < 2 {
            return Err(MlError::DegenerateData("a tree needs at least 2 rows".into()));
        }
        if params.min_leaf == 0 {
            return Err(MlError::InvalidParameter("min_leaf must be at least 1".into()));
        }
        Ok(build::<rand_chacha::ChaCha8Rng>(
            x,
            y,
            (0..x.len()).collect(),
            params,
            None,
        ))
    }

    pub fn leaf_counts(&self, x: &[f64]) -> [usize; 2] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Majority class of the reached leaf (ties to 0) and its class-1 fraction.
    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        let c = self.leaf_counts(x);
        let label = usize::from(c[1] > c[0]);
        (label, c[1] as f64 / (c[0] + c[1]).max(1) as f64)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

pub fn fit_tree(train: &Dataset, params: &TreeParams) -> Result<TrainedModel> {
    let (scaler, xs) = standardize(train)?;
    Ok(TrainedModel {
        model: Model::Tree(TreeModel::fit(&xs, &train.y, params)?),
        scaler,
    })
}
