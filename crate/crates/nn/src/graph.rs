//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters enter
//! through [`Graph::param`] and are addressed by their index into the
//! parameter slice, so [`Graph::backward`] can return gradients aligned with
//! that slice.

use crate::tensor::Tensor;
use crate::NnError;

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    /// `y = W x (+ b)` with `W: [out, in]`.
    Affine {
        w: Var,
        x: Var,
        b: Option<Var>,
    },
    /// Valid 1-D convolution, stride 1: `x: [cin, L]`, `w: [cout, cin, k]`, `b: [cout]`.
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
    },
    /// Non-overlapping max pooling along the last axis; stores the winning flat index.
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Slice {
        x: Var,
        start: usize,
    },
    Sum(Var),
    /// Softmax cross-entropy against one class index; stores the probabilities.
    SoftmaxCe {
        logits: Var,
        label: usize,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p [Tensor],
    nodes: Vec<Node>,
}

fn mismatch(msg: String) -> NnError {
    NnError::ShapeMismatch(msg)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p [Tensor]) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, index: usize) -> Var {
        let t = self.params[index].clone();
        self.push(t, Op::Param(index))
    }

    pub fn affine(&mut self, w: Var, x: Var, b: Option<Var>) -> Result<Var, NnError> {
        let (ws, xs) = (&self.value(w).shape, &self.value(x).shape);
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(mismatch(format!("affine: W {ws:?} x {xs:?}")));
        }
        let (out, inp) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.value(b).shape != [out] {
                return Err(mismatch(format!("affine bias {:?}, want [{out}]", self.value(b).shape)));
            }
        }
        let wd = &self.value(w).data;
        let xd = &self.value(x).data;
        let mut y: Vec<f64> = (0..out)
            .map(|o| wd[o * inp..(o + 1) * inp].iter().zip(xd).map(|(a, b)| a * b).sum())
            .collect();
        if let Some(b) = b {
            for (yi, bi) in y.iter_mut().zip(&self.value(b).data) {
                *yi += bi;
            }
        }
        Ok(self.push(Tensor::vector(y), Op::Affine { w, x, b }))
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NnError> {
        let (xs, ws, bs) = (
            self.value(x).shape.clone(),
            self.value(w).shape.clone(),
            self.value(b).shape.clone(),
        );
        if xs.len() != 2 || ws.len() != 3 || ws[1] != xs[0] || bs != [ws[0]] || ws[2] > xs[1] {
            return Err(mismatch(format!("conv1d: x {xs:?} w {ws:?} b {bs:?}")));
        }
        let (cin, len) = (xs[0], xs[1]);
        let (cout, k) = (ws[0], ws[2]);
        let lout = len - k + 1;
        let (xd, wd, bd) = (&self.value(x).data, &self.value(w).data, &self.value(b).data);
        let mut y = vec![0.0; cout * lout];
        for o in 0..cout {
            let row = &mut y[o * lout..(o + 1) * lout];
            row.iter_mut().for_each(|v| *v = bd[o]);
            for c in 0..cin {
                let xr = &xd[c * len..(c + 1) * len];
                for j in 0..k {
                    let wv = wd[(o * cin + c) * k + j];
                    for (t, yv) in row.iter_mut().enumerate() {
                        *yv += wv * xr[t + j];
                    }
                }
            }
        }
        Ok(self.push(Tensor { shape: vec![cout, lout], data: y }, Op::Conv1d { x, w, b }))
    }

    /// Pools windows of `k` along the last axis of a `[C, L]` tensor; a
    /// trailing partial window is dropped and ties pick the first maximum.
    pub fn maxpool(&mut self, x: Var, k: usize) -> Result<Var, NnError> {
        let xs = self.value(x).shape.clone();
        if xs.len() != 2 || k == 0 || xs[1] < k {
            return Err(mismatch(format!("maxpool({k}) on {xs:?}")));
        }
        let (c, len) = (xs[0], xs[1]);
        let lout = len / k;
        let xd = &self.value(x).data;
        let mut y = Vec::with_capacity(c * lout);
        let mut argmax = Vec::with_capacity(c * lout);
        for ch in 0..c {
            for t in 0..lout {
                let base = ch * len + t * k;
                let mut best = base;
                for j in base + 1..base + k {
                    if xd[j] > xd[best] {
                        best = j;
                    }
                }
                y.push(xd[best]);
                argmax.push(best);
            }
        }
        Ok(self.push(Tensor { shape: vec![c, lout], data: y }, Op::MaxPool { x, argmax }))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(x);
        let out = Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&v| f(v)).collect(),
        };
        self.push(out, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, f64::tanh, Op::Tanh(x))
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(mismatch(format!("elementwise {:?} vs {:?}", ta.shape, tb.shape)));
        }
        let out = Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect(),
        };
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Flat slice `[start, start+len)` as a vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let t = self.value(x);
        if start + len > t.len() {
            return Err(mismatch(format!("slice {start}+{len} of {} values", t.len())));
        }
        let out = Tensor::vector(t.data[start..start + len].to_vec());
        Ok(self.push(out, Op::Slice { x, start }))
    }

    /// Flattens to a vector (a zero-cost slice of everything).
    pub fn flatten(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        self.slice(x, 0, n).expect("full slice")
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::vector(vec![s]), Op::Sum(x))
    }

    /// Mean-free softmax cross-entropy `−ln softmax(z)[label]` as a scalar.
    pub fn softmax_ce(&mut self, logits: Var, label: usize) -> Result<Var, NnError> {
        let z = &self.value(logits).data;
        if self.value(logits).shape.len() != 1 || label >= z.len() {
            return Err(mismatch(format!(
                "softmax_ce: logits {:?}, label {label}",
                self.value(logits).shape
            )));
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let loss = total.ln() - (z[label] - m);
        Ok(self.push(
            Tensor::vector(vec![loss]),
            Op::SoftmaxCe {
                logits,
                label,
                probs,
            },
        ))
    }

    /// Gradients of the scalar `out` with respect to every parameter; entries
    /// for parameters not on the tape are zero. Repeated uses of one parameter
    /// accumulate.
    pub fn backward(&self, out: Var) -> Vec<Tensor> {
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(vec![1.0; self.nodes[out.0].value.len()]);
        let mut param_grads: Vec<Tensor> =
            self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect();

        fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()])
        }

        for id in (0..=out.0).rev() {
            let Some(gy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (a, g) in param_grads[*p].data.iter_mut().zip(&gy) {
                        *a += g;
                    }
                }
                Op::Affine { w, x, b } => {
                    let inp = self.nodes[x.0].value.len();
                    let wd = &self.nodes[w.0].value.data;
                    let xd = &self.nodes[x.0].value.data;
                    {
                        let gw = acc(&mut grads, &self.nodes, *w);
                        for (o, &g) in gy.iter().enumerate() {
                            for (gwi, xi) in gw[o * inp..(o + 1) * inp].iter_mut().zip(xd) {
                                *gwi += g * xi;
                            }
                        }
                    }
                    {
                        let gx = acc(&mut grads, &self.nodes, *x);
                        for (o, &g) in gy.iter().enumerate() {
                            for (gxi, wi) in gx.iter_mut().zip(&wd[o * inp..(o + 1) * inp]) {
                                *gxi += g * wi;
                            }
                        }
                    }
                    if let Some(b) = b {
                        let gb = acc(&mut grads, &self.nodes, *b);
                        for (a, g) in gb.iter_mut().zip(&gy) {
                            *a += g;
                        }
                    }
                }
                Op::Conv1d { x, w, b } => {
                    let (cin, len) = (self.nodes[x.0].value.shape[0], self.nodes[x.0].value.shape[1]);
                    let ws = &self.nodes[w.0].value.shape;
                    let (cout, k) = (ws[0], ws[2]);
                    let lout = len - k + 1;
                    let xd = &self.nodes[x.0].value.data;
                    let wd = &self.nodes[w.0].value.data;
                    {
                        let gb = acc(&mut grads, &self.nodes, *b);
                        for o in 0..cout {
                            gb[o] += gy[o * lout..(o + 1) * lout].iter().sum::<f64>();
                        }
                    }
                    {
                        let gw = acc(&mut grads, &self.nodes, *w);
                        for o in 0..cout {
                            let g_row = &gy[o * lout..(o + 1) * lout];
                            for c in 0..cin {
                                let xr = &xd[c * len..(c + 1) * len];
                                for j in 0..k {
                                    gw[(o * cin + c) * k + j] +=
                                        g_row.iter().zip(&xr[j..j + lout]).map(|(a, b)| a * b).sum::<f64>();
                                }
                            }
                        }
                    }
                    {
                        let gx = acc(&mut grads, &self.nodes, *x);
                        for o in 0..cout {
                            let g_row = &gy[o * lout..(o + 1) * lout];
                            for c in 0..cin {
                                let gxr = &mut gx[c * len..(c + 1) * len];
                                for j in 0..k {
                                    let wv = wd[(o * cin + c) * k + j];
                                    for (t, g) in g_row.iter().enumerate() {
                                        gxr[t + j] += wv * g;
                                    }
                                }
                            }
                        }
                    }
                }
                Op::MaxPool { x, argmax } => {
                    let gx = acc(&mut grads, &self.nodes, *x);
                    for (&src, g) in argmax.iter().zip(&gy) {
                        gx[src] += g;
                    }
                }
                Op::Relu(x) => {
                    let xd = &self.nodes[x.0].value.data;
                    let gx = acc(&mut grads, &self.nodes, *x);
                    for ((a, g), v) in gx.iter_mut().zip(&gy).zip(xd) {
                        if *v > 0.0 {
                            *a += g;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let yd = &node.value.data;
                    let gx = acc(&mut grads, &self.nodes, *x);
                    for ((a, g), y) in gx.iter_mut().zip(&gy).zip(yd) {
                        *a += g * y * (1.0 - y);
                    }
                }
                Op::Tanh(x) => {
                    let yd = &node.value.data;
                    let gx = acc(&mut grads, &self.nodes, *x);
                    for ((a, g), y) in gx.iter_mut().zip(&gy).zip(yd) {
                        *a += g * (1.0 - y * y);
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        let gv = acc(&mut grads, &self.nodes, v);
                        for (s, g) in gv.iter_mut().zip(&gy) {
                            *s += g;
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (&self.nodes[a.0].value.data, &self.nodes[b.0].value.data);
                    {
                        let ga = acc(&mut grads, &self.nodes, *a);
                        for ((s, g), o) in ga.iter_mut().zip(&gy).zip(bd) {
                            *s += g * o;
                        }
                    }
                    let gb = acc(&mut grads, &self.nodes, *b);
                    for ((s, g), o) in gb.iter_mut().zip(&gy).zip(ad) {
                        *s += g * o;
                    }
                }
                Op::Slice { x, start } => {
                    let gx = acc(&mut grads, &self.nodes, *x);
                    for (s, g) in gx[*start..*start + gy.len()].iter_mut().zip(&gy) {
                        *s += g;
                    }
                }
                Op::Sum(x) => {
                    let gx = acc(&mut grads, &self.nodes, *x);
                    gx.iter_mut().for_each(|s| *s += gy[0]);
                }
                Op::SoftmaxCe {
                    logits,
                    label,
                    probs,
                } => {
                    let gz = acc(&mut grads, &self.nodes, *logits);
                    for (i, (s, p)) in gz.iter_mut().zip(probs).enumerate() {
                        let target = if i == *label { 1.0 } else { 0.0 };
                        *s += gy[0] * (p - target);
                    }
                }
            }
        }
        param_grads
    }
}
