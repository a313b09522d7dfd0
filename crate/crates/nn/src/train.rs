use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::net::{forward, Network, Optimizer};
use crate::tensor::Tensor;
use crate::{NetConfig, NnError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean cross-entropy per epoch, measured during the epoch.
    pub loss_curve: Vec<f64>,
}

impl TrainReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), NnError> {
        let io = |e: std::io::Error| NnError::Persistence(format!("{}: {e}", path.display()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(f, "epoch,loss").map_err(io)?;
        for (i, l) in self.loss_curve.iter().enumerate() {
            writeln!(f, "{},{l}", i + 1).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// Loss and parameter gradients for one sample.
pub fn sample_gradient(
    net: &Network,
    x: &Tensor,
    label: usize,
) -> Result<(f64, Vec<Tensor>), NnError> {
    let mut g = Graph::new(&net.params);
    let logits = forward(&mut g, &net.config, x)?;
    let loss = g.softmax_ce(logits, label)?;
    Ok((g.value(loss).data[0], g.backward(loss)))
}

fn check_data(config: &NetConfig, xs: &[Tensor], ys: &[usize]) -> Result<(), NnError> {
    if xs.is_empty() {
        return Err(NnError::DegenerateData("no training samples".into()));
    }
    if xs.len() != ys.len() {
        return Err(NnError::DegenerateData(format!(
            "{} inputs but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(i) = ys.iter().position(|&y| y > 1) {
        return Err(NnError::DegenerateData(format!("label {} at sample {i}", ys[i])));
    }
    if !ys.contains(&0) || !ys.contains(&1) {
        return Err(NnError::DegenerateData("both classes must be present".into()));
    }
    let want = config.input_shape();
    for (i, x) in xs.iter().enumerate() {
        if x.shape != want {
            return Err(NnError::ShapeMismatch(format!(
                "sample {i} has shape {:?}, expected {want:?}",
                x.shape
            )));
        }
        if !x.is_finite() {
            return Err(NnError::DegenerateData(format!("sample {i} is not finite")));
        }
    }
    Ok(())
}

struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

/// Mini-batch training from a fresh initialization. Each epoch shuffles with
/// its own RNG stream; gradients are averaged over the batch and reduced in
/// sample order, so results do not depend on thread scheduling.
pub fn train(
    config: &NetConfig,
    xs: &[Tensor],
    ys: &[usize],
) -> Result<(Network, TrainReport), NnError> {
    let mut net = Network::new(*config)?;
    let report = train_network(&mut net, xs, ys)?;
    Ok((net, report))
}

/// Continues training `net` for `net.config.epochs` epochs.
pub fn train_network(net: &mut Network, xs: &[Tensor], ys: &[usize]) -> Result<TrainReport, NnError> {
    let config = net.config;
    config.validate()?;
    check_data(&config, xs, ys)?;
    let mut adam = AdamState {
        m: net.params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
        v: net.params.iter().map(|p| Tensor::zeros(&p.shape)).collect(),
        t: 0,
    };
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64 + 1);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut losses = vec![0.0; xs.len()];
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Vec<Tensor>)> = batch
                .par_iter()
                .map(|&i| sample_gradient(net, &xs[i], ys[i]))
                .collect::<Result<_, _>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads: Vec<Tensor> = net.params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
            for (&i, (loss, g)) in batch.iter().zip(&results) {
                losses[i] = *loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, v) in acc.data.iter_mut().zip(&gi.data) {
                        *a += v * scale;
                    }
                }
            }
            step(net, &grads, &mut adam);
        }
        let mean = losses.iter().sum::<f64>() / xs.len() as f64;
        if !mean.is_finite() {
            return Err(NnError::DegenerateData(format!("loss diverged in epoch {}", epoch + 1)));
        }
        loss_curve.push(mean);
    }
    Ok(TrainReport { loss_curve })
}

fn step(net: &mut Network, grads: &[Tensor], adam: &mut AdamState) {
    let lr = net.config.lr;
    match net.config.optimizer {
        Optimizer::Sgd => {
            for (p, g) in net.params.iter_mut().zip(grads) {
                for (w, d) in p.data.iter_mut().zip(&g.data) {
                    *w -= lr * d;
                }
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            for (k, (p, g)) in net.params.iter_mut().zip(grads).enumerate() {
                let (m, v) = (&mut adam.m[k].data, &mut adam.v[k].data);
                for (j, (w, d)) in p.data.iter_mut().zip(&g.data).enumerate() {
                    m[j] = beta1 * m[j] + (1.0 - beta1) * d;
                    v[j] = beta2 * v[j] + (1.0 - beta2) * d * d;
                    *w -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                }
            }
        }
    }
}

const CHECKPOINT_TAG: &str = "ecgstress-net";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    network: Network,
}

impl Network {
    pub fn to_json(&self) -> Result<String, NnError> {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_TAG.into(),
            version: CHECKPOINT_VERSION,
            network: self.clone(),
        })
        .map_err(|e| NnError::Persistence(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| NnError::Persistence(e.to_string()))?;
        if ck.format != CHECKPOINT_TAG || ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Persistence(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let shapes = ck.network.config.param_shapes();
        let ok = shapes.len() == ck.network.params.len()
            && shapes.iter().zip(&ck.network.params).all(|(s, p)| {
                *s == p.shape && p.data.len() == s.iter().product::<usize>()
            });
        if !ok {
            return Err(NnError::Persistence("parameter shapes do not match the config".into()));
        }
        Ok(ck.network)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_json()?)
            .map_err(|e| NnError::Persistence(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NnError::Persistence(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
