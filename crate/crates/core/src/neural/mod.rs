//! Feed-forward networks: forward pass, losses and exact backpropagation.
//!
//! A layer maps its input `p` to `sigma(W p + b)`. Weights are stored
//! `out_dim x in_dim` so row `j` holds the incoming weights of unit `j`;
//! batches are row-major with one sample per row.

mod gradcheck;
mod io;
mod train;

pub use gradcheck::{gradient_check, gradient_check_at, GradCheckOptions, GradCheckReport, ParamKind};
pub use io::{params_from_json, params_to_json, SerializedLayer, SerializedNetwork, NETWORK_FORMAT};
pub use train::{train, train_from, OptimizerKind, TrainConfig, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{glorot_uniform, Matrix, NumericsError, Rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("parameters do not match spec: {0}")]
    ParamMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("cannot parse network parameters: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

/// Probabilities fed to cross-entropy are clamped to `[CLAMP, 1 - CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Linear => "linear",
        }
    }

    fn apply(self, q: &Matrix) -> Matrix {
        match self {
            Activation::Relu => q.map(|v| v.max(0.0)),
            Activation::Sigmoid => q.map(sigmoid),
            Activation::Linear => q.clone(),
            Activation::Softmax => {
                let mut out = q.clone();
                for r in 0..out.rows() {
                    softmax_in_place(out.row_mut(r));
                }
                out
            }
        }
    }

    /// Pulls `grad` (dL/d output) back through the activation, giving dL/dq.
    fn backprop(self, grad: &mut Matrix, q: &Matrix, out: &Matrix) {
        match self {
            Activation::Linear => {}
            Activation::Relu => {
                for (g, &qv) in grad.as_mut_slice().iter_mut().zip(q.as_slice()) {
                    if qv <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &p) in grad.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    *g *= p * (1.0 - p);
                }
            }
            Activation::Softmax => {
                for r in 0..grad.rows() {
                    let p = out.row(r);
                    let g = grad.row_mut(r);
                    let inner: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    for (gi, pi) in g.iter_mut().zip(p) {
                        *gi = pi * (*gi - inner);
                    }
                }
            }
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self { in_dim, out_dim, activation }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NeuralError::InvalidSpec("a network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(NeuralError::InvalidSpec(format!("layer {i} has a zero dimension")));
            }
            if l.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(NeuralError::InvalidSpec(format!("softmax on non-final layer {i}")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_dim != w[1].in_dim {
                return Err(NeuralError::InvalidSpec(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].out_dim,
                    i + 1,
                    w[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Dense chain `dims[0] -> dims[1] -> ...` with `hidden` on every layer but the last.
    pub fn chain(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(NeuralError::InvalidSpec("need at least input and output widths".into()));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| LayerSpec::new(dims[i], dims[i + 1], if i + 1 == n { output } else { hidden }))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    /// First `n` layers as their own network.
    pub fn prefix(&self, n: usize) -> Result<NetworkSpec> {
        if n == 0 || n > self.layers.len() {
            return Err(NeuralError::InvalidSpec(format!("prefix of {n} layers out of range")));
        }
        Self::new(self.layers[..n].to_vec())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.out_dim * (l.in_dim + 1)).sum()
    }

    /// Compact `205-200(relu)-...` description.
    pub fn describe(&self) -> String {
        let mut s = self.input_dim().to_string();
        for l in &self.layers {
            s.push_str(&format!("-{}({})", l.out_dim, l.activation.name()));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `out_dim x in_dim`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Weights and biases of every layer. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: &NetworkSpec, rng: &mut Rng) -> Self {
        let layers = spec
            .layers()
            .iter()
            .map(|l| LayerParams { weights: glorot_uniform(rng, l.in_dim, l.out_dim), bias: vec![0.0; l.out_dim] })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers()
            .iter()
            .map(|l| LayerParams { weights: Matrix::zeros(l.out_dim, l.in_dim), bias: vec![0.0; l.out_dim] })
            .collect();
        Self { layers }
    }

    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers().len() {
            return Err(NeuralError::ParamMismatch(format!(
                "{} parameter layers for a {}-layer spec",
                self.layers.len(),
                spec.layers().len()
            )));
        }
        for (i, (p, l)) in self.layers.iter().zip(spec.layers()).enumerate() {
            if p.weights.shape() != (l.out_dim, l.in_dim) || p.bias.len() != l.out_dim {
                return Err(NeuralError::ParamMismatch(format!(
                    "layer {i}: weights {:?}, bias {}, expected ({}, {})",
                    p.weights.shape(),
                    p.bias.len(),
                    l.out_dim,
                    l.in_dim
                )));
            }
            if !p.weights.is_finite() || p.bias.iter().any(|b| !b.is_finite()) {
                return Err(NeuralError::ParamMismatch(format!("layer {i} has non-finite values")));
            }
        }
        Ok(())
    }

    /// First `n` layers.
    pub fn prefix(&self, n: usize) -> NetworkParams {
        NetworkParams { layers: self.layers[..n].to_vec() }
    }

    pub fn max_abs_diff(&self, other: &NetworkParams) -> f64 {
        let mut m = 0.0f64;
        for (a, b) in self.layers.iter().zip(&other.layers) {
            m = m.max(a.weights.max_abs_diff(&b.weights).unwrap_or(f64::INFINITY));
            for (x, y) in a.bias.iter().zip(&b.bias) {
                m = m.max((x - y).abs());
            }
        }
        m
    }

    pub fn all_zero(&self) -> bool {
        self.layers.iter().all(|l| l.weights.as_slice().iter().all(|&v| v == 0.0) && l.bias.iter().all(|&v| v == 0.0))
    }
}

/// Everything backprop needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Matrix,
    /// Pre-activations `W p + b`, one per layer.
    pub pre: Vec<Matrix>,
    /// Activations, one per layer; the last is the network output.
    pub post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("non-empty network")
    }

    /// Input to layer `i`.
    pub fn layer_input(&self, i: usize) -> &Matrix {
        if i == 0 {
            &self.input
        } else {
            &self.post[i - 1]
        }
    }
}

fn layer_forward(l: &LayerSpec, p: &LayerParams, x: &Matrix) -> Result<(Matrix, Matrix)> {
    let mut q = x.matmul_transposed(&p.weights)?;
    q.add_row_vector(&p.bias)?;
    let a = l.activation.apply(&q);
    Ok((q, a))
}

pub fn forward(spec: &NetworkSpec, params: &NetworkParams, x: &Matrix) -> Result<ForwardCache> {
    params.check(spec)?;
    if x.cols() != spec.input_dim() {
        return Err(NeuralError::DimensionMismatch(format!(
            "input has {} columns, network expects {}",
            x.cols(),
            spec.input_dim()
        )));
    }
    forward_unchecked(spec, params, x)
}

/// `forward` without the parameter scan; callers have validated `params` and `x`.
pub(crate) fn forward_unchecked(spec: &NetworkSpec, params: &NetworkParams, x: &Matrix) -> Result<ForwardCache> {
    let mut pre = Vec::with_capacity(spec.layers().len());
    let mut post: Vec<Matrix> = Vec::with_capacity(spec.layers().len());
    for (l, p) in spec.layers().iter().zip(&params.layers) {
        let (q, a) = layer_forward(l, p, post.last().unwrap_or(x))?;
        pre.push(q);
        post.push(a);
    }
    Ok(ForwardCache { input: x.clone(), pre, post })
}

/// Network output only.
pub fn predict(spec: &NetworkSpec, params: &NetworkParams, x: &Matrix) -> Result<Matrix> {
    Ok(forward(spec, params, x)?.post.pop().expect("non-empty network"))
}

/// Output of layers `from..` given the activation entering layer `from`.
pub(crate) fn forward_from(spec: &NetworkSpec, params: &NetworkParams, from: usize, input: &Matrix) -> Result<Matrix> {
    let mut a = input.clone();
    for (l, p) in spec.layers()[from..].iter().zip(&params.layers[from..]) {
        a = layer_forward(l, p, &a)?.1;
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    CategoricalCrossEntropy,
    BinaryCrossEntropy,
    MeanSquaredError,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::CategoricalCrossEntropy => "categorical_crossentropy",
            Loss::BinaryCrossEntropy => "binary_crossentropy",
            Loss::MeanSquaredError => "mse",
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(NeuralError::DimensionMismatch(format!(
            "predictions {:?} vs targets {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.rows() == 0 {
        return Err(NeuralError::DimensionMismatch("empty batch".into()));
    }
    Ok(())
}

/// Mean loss over the batch. Categorical cross-entropy sums over classes per
/// sample; binary cross-entropy and MSE average over every output entry.
pub fn loss_value(loss: Loss, predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    same_shape(predictions, targets)?;
    let batch = predictions.rows() as f64;
    let entries = predictions.as_slice().len() as f64;
    let pairs = predictions.as_slice().iter().zip(targets.as_slice());
    Ok(match loss {
        Loss::CategoricalCrossEntropy => -pairs.map(|(&p, &y)| y * clamp_prob(p).ln()).sum::<f64>() / batch,
        Loss::BinaryCrossEntropy => {
            -pairs
                .map(|(&p, &y)| {
                    let p = clamp_prob(p);
                    y * p.ln() + (1.0 - y) * (1.0 - p).ln()
                })
                .sum::<f64>()
                / entries
        }
        Loss::MeanSquaredError => pairs.map(|(&p, &y)| (p - y) * (p - y)).sum::<f64>() / entries,
    })
}

/// dL/dq for the output layer.
fn output_delta(spec: &NetworkSpec, cache: &ForwardCache, targets: &Matrix, loss: Loss) -> Matrix {
    let out = cache.output();
    let batch = out.rows() as f64;
    let entries = out.as_slice().len() as f64;
    let act = spec.output_activation();
    let pairs = out.as_slice().iter().zip(targets.as_slice());

    let fused = match (act, loss) {
        (Activation::Softmax, Loss::CategoricalCrossEntropy) => Some(batch),
        (Activation::Sigmoid, Loss::BinaryCrossEntropy) => Some(entries),
        _ => None,
    };
    if let Some(scale) = fused {
        let data = pairs.map(|(&p, &y)| (p - y) / scale).collect();
        return Matrix::from_vec(out.rows(), out.cols(), data).expect("shape");
    }

    let in_range = |p: f64| p > PROB_CLAMP && p < 1.0 - PROB_CLAMP;
    let data = pairs
        .map(|(&p, &y)| match loss {
            Loss::MeanSquaredError => 2.0 * (p - y) / entries,
            Loss::CategoricalCrossEntropy if in_range(p) => -y / p / batch,
            Loss::BinaryCrossEntropy if in_range(p) => (-y / p + (1.0 - y) / (1.0 - p)) / entries,
            _ => 0.0,
        })
        .collect();
    let mut grad = Matrix::from_vec(out.rows(), out.cols(), data).expect("shape");
    act.backprop(&mut grad, cache.pre.last().expect("layer"), out);
    grad
}

/// Exact gradients of the mean batch loss with respect to every parameter.
pub fn backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    cache: &ForwardCache,
    targets: &Matrix,
    loss: Loss,
) -> Result<NetworkParams> {
    params.check(spec)?;
    backward_unchecked(spec, params, cache, targets, loss)
}

/// `backward` without the parameter scan.
pub(crate) fn backward_unchecked(
    spec: &NetworkSpec,
    params: &NetworkParams,
    cache: &ForwardCache,
    targets: &Matrix,
    loss: Loss,
) -> Result<NetworkParams> {
    same_shape(cache.output(), targets)?;
    let n = spec.layers().len();
    if cache.post.len() != n || cache.pre.len() != n {
        return Err(NeuralError::DimensionMismatch("forward cache does not match network depth".into()));
    }

    let mut grads: Vec<Option<LayerParams>> = vec![None; n];
    let mut delta = output_delta(spec, cache, targets, loss);
    for i in (0..n).rev() {
        let weights = delta.transposed_matmul(cache.layer_input(i))?;
        let bias = delta.column_sums();
        grads[i] = Some(LayerParams { weights, bias });
        if i > 0 {
            let mut upstream = delta.matmul(&params.layers[i].weights)?;
            spec.layers()[i - 1].activation.backprop(&mut upstream, &cache.pre[i - 1], &cache.post[i - 1]);
            delta = upstream;
        }
    }
    Ok(NetworkParams { layers: grads.into_iter().map(|g| g.expect("filled")).collect() })
}

/// One-hot rows for `labels` over `n_classes` columns.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), n_classes);
    for (r, &l) in labels.iter().enumerate() {
        m.set(r, l, 1.0);
    }
    m
}

/// Single-column 0/1 targets.
pub fn binary_targets(labels: &[usize]) -> Matrix {
    Matrix::from_vec(labels.len(), 1, labels.iter().map(|&l| l as f64).collect()).expect("shape")
}
