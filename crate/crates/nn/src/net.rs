//! The CNN and LSTM classifiers.
//!
//! CNN: conv(k7, 8ch) → ReLU → maxpool 4 → conv(k5, 16ch) → ReLU → maxpool 4
//! → dense(hidden) → ReLU → dense(2).
//!
//! LSTM: one layer over `input_len / frame` steps of `frame` samples, gates
//! in the order input, forget, cell, output; the final hidden state feeds a
//! dense(2) head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, Var};
use crate::tensor::Tensor;
use crate::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    Cnn,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub arch: Arch,
    pub input_len: usize,
    /// Dense width (CNN) or hidden state size (LSTM).
    pub hidden: usize,
    /// Samples per LSTM time step.
    pub frame: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

pub const CONV1: (usize, usize) = (8, 7);
pub const CONV2: (usize, usize) = (16, 5);
pub const POOL: usize = 4;

impl NetConfig {
    pub fn new(arch: Arch) -> Self {
        NetConfig {
            arch,
            input_len: 512,
            hidden: match arch {
                Arch::Cnn => 32,
                Arch::Lstm => 16,
            },
            frame: 8,
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            seed: 0,
            optimizer: Optimizer::ADAM,
        }
    }

    /// Flattened feature count entering the CNN's first dense layer.
    pub fn cnn_flat_len(&self) -> Option<usize> {
        let l1 = self.input_len.checked_sub(CONV1.1 - 1)?;
        let p1 = l1 / POOL;
        let l2 = p1.checked_sub(CONV2.1 - 1)?;
        let p2 = l2 / POOL;
        (p2 > 0).then_some(CONV2.0 * p2)
    }

    pub fn steps(&self) -> usize {
        self.input_len / self.frame
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self.arch {
            Arch::Cnn => vec![self.input_len],
            Arch::Lstm => vec![self.steps(), self.frame],
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::InvalidConfig(m));
        if self.hidden == 0 {
            return bad("hidden must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        match self.arch {
            Arch::Cnn if self.cnn_flat_len().is_none() => {
                bad(format!("input_len {} too short for the CNN", self.input_len))
            }
            Arch::Lstm if self.frame == 0 || self.input_len % self.frame != 0 => bad(format!(
                "input_len {} must be a positive multiple of frame {}",
                self.input_len, self.frame
            )),
            _ => Ok(()),
        }
    }

    /// Shapes of every parameter tensor, in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let h = self.hidden;
        match self.arch {
            Arch::Cnn => vec![
                vec![CONV1.0, 1, CONV1.1],
                vec![CONV1.0],
                vec![CONV2.0, CONV1.0, CONV2.1],
                vec![CONV2.0],
                vec![h, self.cnn_flat_len().unwrap_or(0)],
                vec![h],
                vec![2, h],
                vec![2],
            ],
            Arch::Lstm => vec![
                vec![4 * h, self.frame],
                vec![4 * h, h],
                vec![4 * h],
                vec![2, h],
                vec![2],
            ],
        }
    }
}

/// Glorot-uniform bound `sqrt(6/(fan_in+fan_out))` for a weight shape.
fn glorot(shape: &[usize]) -> f64 {
    let (fan_in, fan_out) = match shape {
        [o, i] => (*i, *o),
        [o, i, k] => (i * k, o * k),
        _ => (1, 1),
    };
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-initialized weights, zero biases, LSTM forget bias 1.
pub fn init_params(config: &NetConfig) -> Result<Vec<Tensor>, NnError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Vec::new();
    for shape in config.param_shapes() {
        let n: usize = shape.iter().product();
        let t = if shape.len() == 1 {
            Tensor::zeros(&shape)
        } else {
            let a = glorot(&shape);
            Tensor {
                data: (0..n).map(|_| rng.random_range(-a..=a)).collect(),
                shape,
            }
        };
        params.push(t);
    }
    if config.arch == Arch::Lstm {
        let h = config.hidden;
        params[2].data[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
    }
    Ok(params)
}

/// Records the forward pass on `g` and returns the `[2]` logits.
pub fn forward(g: &mut Graph<'_>, config: &NetConfig, x: &Tensor) -> Result<Var, NnError> {
    let want = config.input_shape();
    if x.shape != want {
        return Err(NnError::ShapeMismatch(format!(
            "input {:?}, expected {want:?}",
            x.shape
        )));
    }
    match config.arch {
        Arch::Cnn => forward_cnn(g, x),
        Arch::Lstm => forward_lstm(g, config, x),
    }
}

fn forward_cnn(g: &mut Graph<'_>, x: &Tensor) -> Result<Var, NnError> {
    let len = x.len();
    let x = g.input(x.clone().reshape(&[1, len])?);
    let (w1, b1, w2, b2, w3, b3, w4, b4) = (
        g.param(0),
        g.param(1),
        g.param(2),
        g.param(3),
        g.param(4),
        g.param(5),
        g.param(6),
        g.param(7),
    );
    let c1 = g.conv1d(x, w1, b1)?;
    let r1 = g.relu(c1);
    let p1 = g.maxpool(r1, POOL)?;
    let c2 = g.conv1d(p1, w2, b2)?;
    let r2 = g.relu(c2);
    let p2 = g.maxpool(r2, POOL)?;
    let flat = g.flatten(p2);
    let d1 = g.affine(w3, flat, Some(b3))?;
    let r3 = g.relu(d1);
    g.affine(w4, r3, Some(b4))
}

fn forward_lstm(g: &mut Graph<'_>, config: &NetConfig, x: &Tensor) -> Result<Var, NnError> {
    let h = lstm_recurrence(g, config, x)?;
    let (wo, bo) = (g.param(3), g.param(4));
    g.affine(wo, h, Some(bo))
}

/// Runs the recurrence and returns the final hidden state.
fn lstm_recurrence(g: &mut Graph<'_>, config: &NetConfig, x: &Tensor) -> Result<Var, NnError> {
    let h_size = config.hidden;
    let (wx, wh, b) = (g.param(0), g.param(1), g.param(2));
    let mut h = g.input(Tensor::zeros(&[h_size]));
    let mut c = g.input(Tensor::zeros(&[h_size]));
    let f = config.frame;
    for t in 0..config.steps() {
        let xt = g.input(Tensor::vector(x.data[t * f..(t + 1) * f].to_vec()));
        let zx = g.affine(wx, xt, Some(b))?;
        let zh = g.affine(wh, h, None)?;
        let z = g.add(zx, zh)?;
        let zi = g.slice(z, 0, h_size)?;
        let zf = g.slice(z, h_size, h_size)?;
        let zg = g.slice(z, 2 * h_size, h_size)?;
        let zo = g.slice(z, 3 * h_size, h_size)?;
        let i = g.sigmoid(zi);
        let fg = g.sigmoid(zf);
        let gg = g.tanh(zg);
        let o = g.sigmoid(zo);
        let keep = g.mul(fg, c)?;
        let write = g.mul(i, gg)?;
        c = g.add(keep, write)?;
        let tc = g.tanh(c);
        h = g.mul(o, tc)?;
    }
    Ok(h)
}

/// A parameterized network ready for inference or further training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: NetConfig,
    pub params: Vec<Tensor>,
}

impl Network {
    pub fn new(config: NetConfig) -> Result<Self, NnError> {
        Ok(Network {
            params: init_params(&config)?,
            config,
        })
    }

    pub fn logits(&self, x: &Tensor) -> Result<[f64; 2], NnError> {
        let mut g = Graph::new(&self.params);
        let out = forward(&mut g, &self.config, x)?;
        let v = &g.value(out).data;
        Ok([v[0], v[1]])
    }

    /// Predicted class (ties to 0) and the softmax probability of class 1.
    pub fn predict(&self, x: &Tensor) -> Result<(usize, f64), NnError> {
        let z = self.logits(x)?;
        let p1 = crate::graph::sigmoid(z[1] - z[0]);
        Ok((usize::from(z[1] > z[0]), p1))
    }

    /// Final LSTM hidden state, for inspection.
    pub fn lstm_hidden(&self, x: &Tensor) -> Result<Vec<f64>, NnError> {
        if self.config.arch != Arch::Lstm {
            return Err(NnError::InvalidConfig("not an LSTM".into()));
        }
        if x.shape != self.config.input_shape() {
            return Err(NnError::ShapeMismatch(format!("input {:?}", x.shape)));
        }
        let mut g = Graph::new(&self.params);
        let h = lstm_recurrence(&mut g, &self.config, x)?;
        Ok(g.value(h).data.clone())
    }
}
