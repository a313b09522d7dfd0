//! Gradient boosting on logistic loss with Newton leaf values.
//!
//! Scores start at the training log-odds. Each round computes
//! `g = p − y`, `h = p(1 − p)`, grows one tree, sets every leaf to
//! `−G/(H + λ)` and adds `learning_rate × leaf` to the scores. Splits are
//! scored by `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]` and only taken when
//! that gain is positive.
//!
//! Growth policies:
//! * `LevelWise`: exact split search, every node grown to `max_depth`.
//! * `LeafWiseHistogram`: features pre-binned into quantile bins; the leaf
//!   with the highest gain is split next until `max_leaves` (or `max_depth`).
//! * `ObliviousOrdered`: symmetric trees (one shared split per level) whose
//!   structure is chosen from ordered gradients. Each of `permutations` random
//!   row orders keeps its own score vector in which a row only receives leaf
//!   updates estimated from rows before it in that order, so a row's own label
//!   never leaks into the gradient used to place it.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tree::{midpoint, GAIN_TIE_EPS};
use crate::{log_loss, standardize, Dataset, MlError, Model, Result, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Growth {
    LevelWise,
    LeafWiseHistogram,
    ObliviousOrdered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub growth: Growth,
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Leaf budget for `LeafWiseHistogram`.
    pub max_leaves: usize,
    pub lambda: f64,
    /// Quantile bins per feature for the histogram-based policies.
    pub bins: usize,
    /// Row orders kept by `ObliviousOrdered`.
    pub permutations: usize,
    pub seed: u64,
}

impl BoostConfig {
    pub fn new(growth: Growth) -> Self {
        BoostConfig {
            growth,
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: match growth {
                Growth::LevelWise => 3,
                Growth::LeafWiseHistogram => 8,
                Growth::ObliviousOrdered => 4,
            },
            max_leaves: 15,
            lambda: 1.0,
            bins: 32,
            permutations: 4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MlError::InvalidParameter(m.into()));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        match self.growth {
            Growth::LeafWiseHistogram if self.max_leaves < 2 => bad("max_leaves must be at least 2"),
            Growth::LeafWiseHistogram | Growth::ObliviousOrdered if self.bins < 2 => {
                bad("bins must be at least 2")
            }
            Growth::ObliviousOrdered if self.permutations == 0 => {
                bad("permutations must be at least 1")
            }
            Growth::ObliviousOrdered if self.lambda == 0.0 => {
                bad("ordered boosting needs lambda > 0 for empty prefixes")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoostTree {
    /// Node 0 is the root; `x[feature] <= threshold` goes left.
    Binary(Vec<RegNode>),
    /// Level `l` contributes bit `l` of the leaf index when `x[f] > t`.
    Oblivious {
        splits: Vec<(usize, f64)>,
        leaves: Vec<f64>,
    },
}

impl BoostTree {
    /// Raw Newton value of the leaf `x` falls into.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            BoostTree::Binary(nodes) => {
                let mut id = 0;
                loop {
                    match &nodes[id] {
                        RegNode::Leaf { value } => return *value,
                        RegNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => id = if x[*feature] <= *threshold { *left } else { *right },
                    }
                }
            }
            BoostTree::Oblivious { splits, leaves } => {
                let idx = splits
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (l, &(f, t))| acc | (usize::from(x[f] > t) << l));
                leaves[idx]
            }
        }
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        match self {
            BoostTree::Binary(nodes) => nodes
                .iter()
                .filter_map(|n| match n {
                    RegNode::Leaf { value } => Some(*value),
                    RegNode::Split { .. } => None,
                })
                .collect(),
            BoostTree::Oblivious { leaves, .. } => leaves.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub growth: Growth,
    /// Training log-odds.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<BoostTree>,
    /// Training log-loss after 0, 1, …, n_trees rounds.
    pub train_loss: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

fn score_term(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Split gain as documented at module level.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    0.5 * (score_term(gl, hl, lambda) + score_term(gr, hr, lambda)
        - score_term(gl + gr, hl + hr, lambda))
}

fn grad_hess(scores: &[f64], y: &[usize]) -> (Vec<f64>, Vec<f64>) {
    scores
        .iter()
        .zip(y)
        .map(|(&s, &c)| {
            let p = sigmoid(s);
            (p - c as f64, p * (1.0 - p))
        })
        .unzip()
}

impl BoostModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], config: &BoostConfig) -> Result<Self> {
        config.validate()?;
        let n = x.len();
        let pos = y.iter().filter(|&&c| c == 1).count();
        if pos == 0 || pos == n {
            return Err(MlError::DegenerateData(
                "boosting needs both classes in the training set".into(),
            ));
        }
        let prior = pos as f64 / n as f64;
        let base_score = (prior / (1.0 - prior)).ln();
        let lr = config.learning_rate;
        let mut scores = vec![base_score; n];
        let loss = |s: &[f64]| log_loss(&s.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>(), y);
        let mut train_loss = vec![loss(&scores)];
        let mut trees = Vec::with_capacity(config.n_trees);

        let binned = match config.growth {
            Growth::LevelWise => None,
            _ => Some(Binned::new(x, config.bins)),
        };
        let mut ordered = match config.growth {
            Growth::ObliviousOrdered => Some(OrderedState::new(n, base_score, config)),
            _ => None,
        };

        for round in 0..config.n_trees {
            let (g, h) = grad_hess(&scores, y);
            let tree = match config.growth {
                Growth::LevelWise => grow_level_wise(x, &g, &h, config),
                Growth::LeafWiseHistogram => {
                    grow_leaf_wise(binned.as_ref().expect("binned"), &g, &h, config)
                }
                Growth::ObliviousOrdered => {
                    let state = ordered.as_mut().expect("ordered state");
                    let b = binned.as_ref().expect("binned");
                    let (og, oh) = grad_hess(&state.scores[round % state.perms.len()], y);
                    let (splits, leaf_of) = grow_oblivious(b, &og, &oh, config);
                    let n_leaves = 1usize << splits.len();
                    let mut gs = vec![0.0; n_leaves];
                    let mut hs = vec![0.0; n_leaves];
                    for i in 0..n {
                        gs[leaf_of[i]] += g[i];
                        hs[leaf_of[i]] += h[i];
                    }
                    let leaves = (0..n_leaves)
                        .map(|l| leaf_value(gs[l], hs[l], config.lambda))
                        .collect();
                    state.update(y, &leaf_of, n_leaves, config);
                    BoostTree::Oblivious { splits, leaves }
                }
            };
            for (s, row) in scores.iter_mut().zip(x) {
                *s += lr * tree.value(row);
            }
            trees.push(tree);
            train_loss.push(loss(&scores));
        }
        Ok(BoostModel {
            growth: config.growth,
            base_score,
            learning_rate: lr,
            trees,
            train_loss,
        })
    }

    /// Raw score using only the first `k` trees.
    pub fn raw_score_with_trees(&self, x: &[f64], k: usize) -> f64 {
        self.base_score
            + self.learning_rate
                * self.trees[..k.min(self.trees.len())]
                    .iter()
                    .map(|t| t.value(x))
                    .sum::<f64>()
    }

    /// `(label, probability)` using only the first `k` trees.
    pub fn predict_with_trees(&self, x: &[f64], k: usize) -> (usize, f64) {
        let p = sigmoid(self.raw_score_with_trees(x, k));
        (usize::from(p > 0.5), p)
    }

    pub fn predict(&self, x: &[f64]) -> (usize, f64) {
        self.predict_with_trees(x, self.trees.len())
    }

    pub fn prior(&self) -> f64 {
        sigmoid(self.base_score)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn better(c: &Candidate, best: &Option<Candidate>) -> bool {
    best.is_none_or(|b| c.gain > b.gain + GAIN_TIE_EPS)
}

fn grow_level_wise(x: &[Vec<f64>], g: &[f64], h: &[f64], cfg: &BoostConfig) -> BoostTree {
    let d = x.first().map_or(0, Vec::len);
    let mut nodes = Vec::new();
    let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> =
        vec![((0..x.len()).collect(), 0, None)];
    while let Some((idx, depth, parent)) = stack.pop() {
        let id = nodes.len();
        link(&mut nodes, parent, id);
        let gs: f64 = idx.iter().map(|&i| g[i]).sum();
        let hs: f64 = idx.iter().map(|&i| h[i]).sum();
        let mut best: Option<Candidate> = None;
        if depth < cfg.max_depth && idx.len() >= 2 {
            let mut order = idx.clone();
            for f in 0..d {
                order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
                let (mut gl, mut hl) = (0.0, 0.0);
                for k in 0..order.len() - 1 {
                    gl += g[order[k]];
                    hl += h[order[k]];
                    let (v, next) = (x[order[k]][f], x[order[k + 1]][f]);
                    if v == next {
                        continue;
                    }
                    let c = Candidate {
                        gain: split_gain(gl, hl, gs - gl, hs - hl, cfg.lambda),
                        feature: f,
                        threshold: midpoint(v, next),
                    };
                    if better(&c, &best) {
                        best = Some(c);
                    }
                }
            }
        }
        match best.filter(|b| b.gain > 0.0) {
            Some(b) => {
                nodes.push(RegNode::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: 0,
                    right: 0,
                });
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x[i][b.feature] <= b.threshold);
                stack.push((r, depth + 1, Some((id, false))));
                stack.push((l, depth + 1, Some((id, true))));
            }
            None => nodes.push(RegNode::Leaf {
                value: leaf_value(gs, hs, cfg.lambda),
            }),
        }
    }
    BoostTree::Binary(nodes)
}

fn link(nodes: &mut [RegNode], parent: Option<(usize, bool)>, id: usize) {
    if let Some((p, is_left)) = parent {
        if let RegNode::Split { left, right, .. } = &mut nodes[p] {
            if is_left {
                *left = id;
            } else {
                *right = id;
            }
        }
    }
}

/// Training rows mapped to per-feature quantile bins.
///
/// `edges[f]` is ascending; a value lands in bin `b` = number of edges below
/// it, so `x <= edges[f][b]` is exactly `bin(x) <= b`.
struct Binned {
    edges: Vec<Vec<f64>>,
    bins: Vec<Vec<u16>>,
    n_rows: usize,
}

impl Binned {
    fn new(x: &[Vec<f64>], max_bins: usize) -> Self {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let mut edges = Vec::with_capacity(d);
        for f in 0..d {
            let mut col: Vec<f64> = x.iter().map(|r| r[f]).collect();
            col.sort_by(f64::total_cmp);
            let mut uniq = col.clone();
            uniq.dedup();
            let e: Vec<f64> = if uniq.len() <= max_bins {
                uniq.windows(2).map(|w| midpoint(w[0], w[1])).collect()
            } else {
                let mut e: Vec<f64> = Vec::new();
                for q in 1..max_bins {
                    let v = col[q * n / max_bins];
                    // Cut just below the quantile value, at the gap to its predecessor.
                    let pos = uniq.partition_point(|&u| u < v);
                    if pos == 0 {
                        continue;
                    }
                    let cut = midpoint(uniq[pos - 1], uniq[pos]);
                    if e.last().map_or(true, |&l| cut > l) {
                        e.push(cut);
                    }
                }
                e
            };
            edges.push(e);
        }
        let bins = (0..d)
            .map(|f| {
                x.iter()
                    .map(|r| edges[f].partition_point(|&e| e < r[f]) as u16)
                    .collect()
            })
            .collect();
        Binned { edges, bins, n_rows: n }
    }

    fn n_bins(&self, f: usize) -> usize {
        self.edges[f].len() + 1
    }
}

/// Per-feature gradient/hessian histograms of a row subset.
fn histograms(b: &Binned, idx: &[usize], g: &[f64], h: &[f64]) -> Vec<Vec<(f64, f64)>> {
    (0..b.edges.len())
        .map(|f| {
            let mut hist = vec![(0.0, 0.0); b.n_bins(f)];
            for &i in idx {
                let e = &mut hist[b.bins[f][i] as usize];
                e.0 += g[i];
                e.1 += h[i];
            }
            hist
        })
        .collect()
}

fn best_histogram_split(
    b: &Binned,
    hist: &[Vec<(f64, f64)>],
    gs: f64,
    hs: f64,
    lambda: f64,
) -> Option<(Candidate, usize)> {
    let mut best: Option<Candidate> = None;
    let mut best_bin = 0;
    for (f, hf) in hist.iter().enumerate() {
        let (mut gl, mut hl) = (0.0, 0.0);
        let mut seen_left = false;
        for (bin, &(bg, bh)) in hf.iter().enumerate().take(hf.len() - 1) {
            gl += bg;
            hl += bh;
            seen_left |= bh > 0.0 || bg != 0.0;
            if !seen_left {
                continue;
            }
            let c = Candidate {
                gain: split_gain(gl, hl, gs - gl, hs - hl, lambda),
                feature: f,
                threshold: b.edges[f][bin],
            };
            if better(&c, &best) {
                best = Some(c);
                best_bin = bin;
            }
        }
    }
    best.map(|c| (c, best_bin))
}

struct LeafState {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    g: f64,
    h: f64,
    split: Option<(Candidate, usize)>,
}

fn grow_leaf_wise(b: &Binned, g: &[f64], h: &[f64], cfg: &BoostConfig) -> BoostTree {
    let make = |node: usize, rows: Vec<usize>, depth: usize| {
        let gs: f64 = rows.iter().map(|&i| g[i]).sum();
        let hs: f64 = rows.iter().map(|&i| h[i]).sum();
        let split = if depth < cfg.max_depth && rows.len() >= 2 {
            let hist = histograms(b, &rows, g, h);
            best_histogram_split(b, &hist, gs, hs, cfg.lambda).filter(|(c, bin)| {
                c.gain > 0.0 && {
                    // Both children must be non-empty.
                    let f = c.feature;
                    rows.iter().any(|&i| b.bins[f][i] as usize <= *bin)
                        && rows.iter().any(|&i| b.bins[f][i] as usize > *bin)
                }
            })
        } else {
            None
        };
        LeafState {
            node,
            rows,
            depth,
            g: gs,
            h: hs,
            split,
        }
    };
    let mut nodes = vec![RegNode::Leaf { value: 0.0 }];
    let mut leaves = vec![make(0, (0..b.n_rows).collect(), 0)];
    while leaves.len() < cfg.max_leaves {
        // Highest gain wins; ties go to the earliest-created leaf.
        let mut pick: Option<usize> = None;
        for (k, leaf) in leaves.iter().enumerate() {
            if let Some((c, _)) = &leaf.split {
                if pick.map_or(true, |p| {
                    c.gain > leaves[p].split.as_ref().unwrap().0.gain + GAIN_TIE_EPS
                }) {
                    pick = Some(k);
                }
            }
        }
        let Some(k) = pick else { break };
        let leaf = leaves.remove(k);
        let (c, bin) = leaf.split.unwrap();
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = leaf
            .rows
            .iter()
            .partition(|&&i| b.bins[c.feature][i] as usize <= bin);
        let (l_id, r_id) = (nodes.len(), nodes.len() + 1);
        nodes[leaf.node] = RegNode::Split {
            feature: c.feature,
            threshold: c.threshold,
            left: l_id,
            right: r_id,
        };
        nodes.push(RegNode::Leaf { value: 0.0 });
        nodes.push(RegNode::Leaf { value: 0.0 });
        leaves.insert(k, make(r_id, r_rows, leaf.depth + 1));
        leaves.insert(k, make(l_id, l_rows, leaf.depth + 1));
    }
    for leaf in &leaves {
        nodes[leaf.node] = RegNode::Leaf {
            value: leaf_value(leaf.g, leaf.h, cfg.lambda),
        };
    }
    BoostTree::Binary(nodes)
}

/// Picks one (feature, border) per level maximizing the gain summed over all
/// current leaves. Returns the splits and each row's leaf index.
fn grow_oblivious(
    b: &Binned,
    g: &[f64],
    h: &[f64],
    cfg: &BoostConfig,
) -> (Vec<(usize, f64)>, Vec<usize>) {
    let n = b.n_rows;
    let d = b.edges.len();
    let mut leaf_of = vec![0usize; n];
    let mut splits = Vec::new();
    for level in 0..cfg.max_depth {
        let n_leaves = 1usize << level;
        // hist[leaf][feature][bin]
        let mut hist: Vec<Vec<Vec<(f64, f64)>>> = (0..n_leaves)
            .map(|_| (0..d).map(|f| vec![(0.0, 0.0); b.n_bins(f)]).collect())
            .collect();
        for i in 0..n {
            for f in 0..d {
                let e = &mut hist[leaf_of[i]][f][b.bins[f][i] as usize];
                e.0 += g[i];
                e.1 += h[i];
            }
        }
        let totals: Vec<(f64, f64)> = hist
            .iter()
            .map(|lh| lh[0].iter().fold((0.0, 0.0), |a, e| (a.0 + e.0, a.1 + e.1)))
            .collect();
        let mut best: Option<(Candidate, usize)> = None;
        for f in 0..d {
            let nb = b.n_bins(f);
            let mut left = vec![(0.0, 0.0); n_leaves];
            for bin in 0..nb - 1 {
                let mut gain = 0.0;
                for leaf in 0..n_leaves {
                    let e = hist[leaf][f][bin];
                    left[leaf].0 += e.0;
                    left[leaf].1 += e.1;
                    let (gl, hl) = left[leaf];
                    let (gt, ht) = totals[leaf];
                    gain += split_gain(gl, hl, gt - gl, ht - hl, cfg.lambda);
                }
                let c = Candidate {
                    gain,
                    feature: f,
                    threshold: b.edges[f][bin],
                };
                if best.as_ref().map_or(true, |(bc, _)| c.gain > bc.gain + GAIN_TIE_EPS) {
                    best = Some((c, bin));
                }
            }
        }
        let Some((c, bin)) = best.filter(|(c, _)| c.gain > 0.0) else {
            break;
        };
        for i in 0..n {
            if b.bins[c.feature][i] as usize > bin {
                leaf_of[i] |= 1 << level;
            }
        }
        splits.push((c.feature, c.threshold));
    }
    (splits, leaf_of)
}

/// Ordered-boosting bookkeeping: one score vector per row permutation.
struct OrderedState {
    perms: Vec<Vec<usize>>,
    scores: Vec<Vec<f64>>,
}

impl OrderedState {
    fn new(n: usize, base: f64, cfg: &BoostConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let perms = (0..cfg.permutations)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect();
        OrderedState {
            perms,
            scores: vec![vec![base; n]; cfg.permutations],
        }
    }

    /// Advances every permutation's scores: row `σ(k)` gets the Newton value
    /// of its leaf computed from rows `σ(0..k)` only.
    fn update(&mut self, y: &[usize], leaf_of: &[usize], n_leaves: usize, cfg: &BoostConfig) {
        for (perm, scores) in self.perms.iter().zip(self.scores.iter_mut()) {
            let (g, h) = grad_hess(scores, y);
            let mut gs = vec![0.0; n_leaves];
            let mut hs = vec![0.0; n_leaves];
            for &i in perm {
                let l = leaf_of[i];
                let delta = leaf_value(gs[l], hs[l], cfg.lambda);
                gs[l] += g[i];
                hs[l] += h[i];
                scores[i] += cfg.learning_rate * delta;
            }
        }
    }
}

pub fn fit_boost(train: &Dataset, config: &BoostConfig) -> Result<TrainedModel> {
    let (scaler, xs) = standardize(train)?;
    Ok(TrainedModel {
        model: Model::Boost(BoostModel::fit(&xs, &train.y, config)?),
        scaler,
    })
}
