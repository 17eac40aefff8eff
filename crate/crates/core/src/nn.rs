//! Minimal feedforward network with explicit forward/backward passes.
//!
//! Supports linear, relu, sigmoid, softmax, and (inverted) dropout layers,
//! binary cross-entropy and cross-entropy losses, and Adam with optional
//! weight decay. Dropout noise is supplied by the caller so a forward pass
//! is a pure function of (input, noise); this is what lets the training
//! harness pin the same noise across repeated objective evaluations.
//!
//! Input-gradient requests are counted on the network
//! ([`Network::input_grad_queries`]); score-function training never needs
//! them, and the counter is the witness.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp applied inside the losses before logs and divisions.
pub const LOSS_CLAMP: f64 = 1e-12;

const ADAM_EPS: f64 = 1e-8;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Uniform fan-in initialization: entries in `(-1/sqrt(cols), 1/sqrt(cols))`.
    pub fn uniform_fan_in<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self { rows, cols, data }
    }

    fn matvec(&self, x: &[f64], bias: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = bias[r];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
        out
    }

    /// `W^T g` — pushes an output gradient back to the layer input.
    fn matvec_transposed(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let gr = g[r];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * gr;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Layer {
    Linear { weight: Matrix, bias: Vec<f64> },
    Relu,
    Sigmoid,
    Softmax,
    Dropout { rate: f64 },
}

impl Layer {
    pub fn linear<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Layer::Linear {
            weight: Matrix::uniform_fan_in(output, input, rng),
            bias: vec![0.0; output],
        }
    }
}

/// Mode-independent feedforward network.
#[derive(Debug, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    #[serde(skip)]
    input_grad_queries: AtomicU64,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            input_grad_queries: AtomicU64::new(0),
        }
    }
}

/// One 0/1 keep-mask per dropout layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutNoise {
    pub masks: Vec<Vec<f64>>,
}

impl DropoutNoise {
    /// No dropout layers, or eval-style determinism for tests.
    pub fn empty() -> Self {
        Self { masks: Vec::new() }
    }
}

/// Activations recorded by a training-mode forward pass.
///
/// `values[i]` is the input to layer i; `values[L]` is the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    values: Vec<Vec<f64>>,
    /// Scaled keep-mask actually applied at each layer (dropout layers only).
    applied_dropout: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("cache has the output")
    }
}

/// Parameter gradients in [`Network::param_tensors`] order, plus the input
/// gradient when requested.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
    pub input: Option<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            tensors: net
                .param_tensors()
                .iter()
                .map(|t| vec![0.0; t.len()])
                .collect(),
            input: None,
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for x in t.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

impl Network {
    /// Validates layer dimension compatibility and dropout rates.
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let mut dim: Option<usize> = None;
        for layer in &layers {
            match layer {
                Layer::Linear { weight, bias } => {
                    if bias.len() != weight.rows {
                        return Err(Error::DimensionMismatch {
                            expected: weight.rows,
                            got: bias.len(),
                        });
                    }
                    if let Some(d) = dim {
                        if d != weight.cols {
                            return Err(Error::DimensionMismatch {
                                expected: d,
                                got: weight.cols,
                            });
                        }
                    }
                    dim = Some(weight.rows);
                }
                Layer::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(Error::Config(format!(
                            "dropout rate must be in [0, 1), got {rate}"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(Self {
            layers,
            input_grad_queries: AtomicU64::new(0),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Linear { weight, .. } => Some(weight.cols),
            _ => None,
        })
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Linear { weight, .. } => Some(weight.rows),
            _ => None,
        })
    }

    /// How many times an input gradient has been requested via `backward`.
    pub fn input_grad_queries(&self) -> u64 {
        self.input_grad_queries.load(Ordering::Relaxed)
    }

    /// Draws one keep-mask per dropout layer; entries are 0.0 or 1.0.
    pub fn sample_dropout_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> DropoutNoise {
        let mut masks = Vec::new();
        let mut dim = self.input_dim().unwrap_or(0);
        for layer in &self.layers {
            match layer {
                Layer::Linear { weight, .. } => dim = weight.rows,
                Layer::Dropout { rate } => {
                    let keep = 1.0 - rate;
                    masks.push(
                        (0..dim)
                            .map(|_| if rng.gen::<f64>() < keep { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
                _ => {}
            }
        }
        DropoutNoise { masks }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if let Some(d) = self.input_dim() {
            if input.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: input.len(),
                });
            }
        }
        Ok(())
    }

    /// Deterministic inference pass; dropout layers are the identity.
    pub fn forward_eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for layer in &self.layers {
            x = match layer {
                Layer::Linear { weight, bias } => weight.matvec(&x, bias),
                Layer::Relu => x.iter().map(|v| v.max(0.0)).collect(),
                Layer::Sigmoid => x.iter().map(|v| sigmoid(*v)).collect(),
                Layer::Softmax => softmax(&x),
                Layer::Dropout { .. } => x,
            };
        }
        Ok(x)
    }

    /// Training pass with caller-supplied dropout noise. Deterministic given
    /// (input, noise); returns the activation cache for `backward`.
    pub fn forward_train(&self, input: &[f64], noise: &DropoutNoise) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        let mut applied_dropout = Vec::with_capacity(self.layers.len());
        values.push(input.to_vec());
        let mut dropout_index = 0usize;
        for layer in &self.layers {
            let x = values.last().expect("at least the input");
            let (next, applied) = match layer {
                Layer::Linear { weight, bias } => (weight.matvec(x, bias), None),
                Layer::Relu => (x.iter().map(|v| v.max(0.0)).collect(), None),
                Layer::Sigmoid => (x.iter().map(|v| sigmoid(*v)).collect(), None),
                Layer::Softmax => (softmax(x), None),
                Layer::Dropout { rate } => {
                    let mask = noise.masks.get(dropout_index).ok_or(Error::DimensionMismatch {
                        expected: dropout_index + 1,
                        got: noise.masks.len(),
                    })?;
                    if mask.len() != x.len() {
                        return Err(Error::DimensionMismatch {
                            expected: x.len(),
                            got: mask.len(),
                        });
                    }
                    dropout_index += 1;
                    let scale = 1.0 / (1.0 - rate);
                    let scaled: Vec<f64> = mask.iter().map(|m| m * scale).collect();
                    (
                        x.iter().zip(&scaled).map(|(v, s)| v * s).collect(),
                        Some(scaled),
                    )
                }
            };
            applied_dropout.push(applied);
            values.push(next);
        }
        let output = values.last().expect("output present").clone();
        Ok((output, ForwardCache { values, applied_dropout }))
    }

    /// Backpropagates a loss gradient at the output through the cached pass.
    ///
    /// Parameter gradients come back in `param_tensors` order; the gradient
    /// with respect to the network input is only produced (and only counted)
    /// when `want_input_grad` is set.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        want_input_grad: bool,
    ) -> Result<Gradients> {
        let out_len = cache.output().len();
        if output_grad.len() != out_len {
            return Err(Error::DimensionMismatch {
                expected: out_len,
                got: output_grad.len(),
            });
        }
        if want_input_grad {
            self.input_grad_queries.fetch_add(1, Ordering::Relaxed);
        }

        let mut tensor_grads: Vec<Vec<f64>> = Vec::new();
        let mut g = output_grad.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.values[li];
            let output = &cache.values[li + 1];
            match layer {
                Layer::Linear { weight, .. } => {
                    let mut dw = vec![0.0; weight.rows * weight.cols];
                    for r in 0..weight.rows {
                        let gr = g[r];
                        let row = &mut dw[r * weight.cols..(r + 1) * weight.cols];
                        for (d, xi) in row.iter_mut().zip(input) {
                            *d = gr * xi;
                        }
                    }
                    let db = g.clone();
                    // Prepend so tensors end up in forward order.
                    tensor_grads.insert(0, db);
                    tensor_grads.insert(0, dw);
                    g = weight.matvec_transposed(&g);
                }
                Layer::Relu => {
                    for (gi, xi) in g.iter_mut().zip(input) {
                        if *xi <= 0.0 {
                            *gi = 0.0;
                        }
                    }
                }
                Layer::Sigmoid => {
                    for (gi, yi) in g.iter_mut().zip(output) {
                        *gi *= yi * (1.0 - yi);
                    }
                }
                Layer::Softmax => {
                    let dot: f64 = g.iter().zip(output).map(|(gi, yi)| gi * yi).sum();
                    for (gi, yi) in g.iter_mut().zip(output) {
                        *gi = yi * (*gi - dot);
                    }
                }
                Layer::Dropout { .. } => {
                    let scaled = cache.applied_dropout[li]
                        .as_ref()
                        .expect("dropout layer recorded its mask");
                    for (gi, s) in g.iter_mut().zip(scaled) {
                        *gi *= s;
                    }
                }
            }
        }
        Ok(Gradients {
            tensors: tensor_grads,
            input: want_input_grad.then_some(g),
        })
    }

    /// Flat views of every parameter tensor (per linear layer: weights, bias).
    pub fn param_tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::Linear { weight, bias } = layer {
                out.push(weight.data.as_slice());
                out.push(bias.as_slice());
            }
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Linear { weight, bias } = layer {
                out.push(weight.data.as_mut_slice());
                out.push(bias.as_mut_slice());
            }
        }
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Adam state over a list of parameter tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, betas: (f64, f64), weight_decay: f64, shapes: &[usize]) -> Self {
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            weight_decay,
            step: 0,
            m: shapes.iter().map(|&s| vec![0.0; s]).collect(),
            v: shapes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn for_params(lr: f64, betas: (f64, f64), weight_decay: f64, params: &[&[f64]]) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(lr, betas, weight_decay, &shapes)
    }

    /// One Adam update with bias correction; weight decay (when nonzero) is
    /// added to the gradient before the moment updates.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::DimensionMismatch {
                    expected: m.len(),
                    got: p.len().max(g.len()),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ti in 0..params.len() {
            let m = &mut self.m[ti];
            let v = &mut self.v[ti];
            let p = &mut params[ti];
            let g = grads[ti];
            for i in 0..p.len() {
                let grad = g[i] + self.weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad * grad;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}

/// Loss value with its gradient at the network output. `clamped` reports
/// whether any output had to be pulled inside the valid domain.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Vec<f64>,
    pub clamped: bool,
}

/// Mean binary cross-entropy over the vector; expects post-sigmoid outputs.
pub fn bce(output: &[f64], target: &[f64]) -> Result<LossOutput> {
    if output.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: output.len(),
        });
    }
    let d = output.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(output.len());
    let mut clamped = false;
    for (&o, &t) in output.iter().zip(target) {
        let o_c = o.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
        if o_c != o {
            clamped = true;
        }
        value -= t * o_c.ln() + (1.0 - t) * (1.0 - o_c).ln();
        grad.push((-t / o_c + (1.0 - t) / (1.0 - o_c)) / d);
    }
    Ok(LossOutput {
        value: value / d,
        grad,
        clamped,
    })
}

/// Negative log-likelihood of the labeled class; expects simplex outputs.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<LossOutput> {
    if label >= probs.len() {
        return Err(Error::IndexOutOfRange {
            index: label,
            len: probs.len(),
        });
    }
    let p = probs[label];
    let p_c = p.clamp(LOSS_CLAMP, 1.0);
    let mut grad = vec![0.0; probs.len()];
    grad[label] = -1.0 / p_c;
    Ok(LossOutput {
        value: -p_c.ln(),
        grad,
        clamped: p_c != p,
    })
}
