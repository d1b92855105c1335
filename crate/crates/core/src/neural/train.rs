use serde::{Deserialize, Serialize};

use super::{backward_unchecked, forward_unchecked, loss_value, Loss, NetworkParams, NetworkSpec, NeuralError, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Adam, lr 1e-3, batch 8, 300 epochs.
    pub fn classifier(loss: Loss) -> Self {
        Self { loss, optimizer: OptimizerKind::Adam, learning_rate: 1e-3, epochs: 300, batch_size: 8, seed: 0 }
    }

    /// Adam, lr 1e-3, batch 8, 500 epochs, MSE.
    pub fn autoencoder() -> Self {
        Self { epochs: 500, ..Self::classifier(Loss::MeanSquaredError) }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_epochs(self, epochs: usize) -> Self {
        Self { epochs, ..self }
    }

    /// Batch size reduced to at most `n_rows` (small training folds).
    pub fn capped_to(self, n_rows: usize) -> Self {
        Self { batch_size: self.batch_size.min(n_rows.max(1)), ..self }
    }

    pub fn validate(&self, n_rows: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::InvalidConfig(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(NeuralError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size > n_rows {
            return Err(NeuralError::InvalidConfig(format!(
                "batch size {} must lie in 1..={n_rows}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// Mean training loss of each epoch, measured on the mini-batches before each update.
    pub loss_history: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-7;

enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, step: i32, m: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
}

impl Optimizer {
    fn new(config: &TrainConfig, params: &NetworkParams) -> Self {
        match config.optimizer {
            OptimizerKind::Sgd => Optimizer::Sgd { lr: config.learning_rate },
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<f64>> = flat_slots(params).map(|s| vec![0.0; s.len()]).collect();
                Optimizer::Adam { lr: config.learning_rate, step: 0, m: zeros.clone(), v: zeros }
            }
        }
    }

    fn step(&mut self, params: &mut NetworkParams, grads: &NetworkParams) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in flat_slots_mut(params).zip(flat_slots(grads)) {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= *lr * gi;
                    }
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let t = *step;
                let lr_t = *lr * (1.0 - ADAM_BETA2.powi(t)).sqrt() / (1.0 - ADAM_BETA1.powi(t));
                for (((p, g), m), v) in flat_slots_mut(params).zip(flat_slots(grads)).zip(m.iter_mut()).zip(v.iter_mut()) {
                    for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                        *pi -= lr_t * *mi / (vi.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
    }
}

fn flat_slots(p: &NetworkParams) -> impl Iterator<Item = &[f64]> {
    p.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
}

fn flat_slots_mut(p: &mut NetworkParams) -> impl Iterator<Item = &mut [f64]> {
    p.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
}

/// Trains from a Glorot initialization drawn from `config.seed`.
pub fn train(spec: &NetworkSpec, config: &TrainConfig, x: &Matrix, y: &Matrix) -> Result<TrainOutcome> {
    let mut init_rng = Rng::new(derive_seed(config.seed, 0));
    let params = NetworkParams::init(spec, &mut init_rng);
    train_from(spec, config, params, x, y)
}

/// Mini-batch training from the given parameters. Sample order is reshuffled
/// every epoch from a stream derived from `config.seed`.
pub fn train_from(
    spec: &NetworkSpec,
    config: &TrainConfig,
    mut params: NetworkParams,
    x: &Matrix,
    y: &Matrix,
) -> Result<TrainOutcome> {
    params.check(spec)?;
    if x.rows() != y.rows() {
        return Err(NeuralError::DimensionMismatch(format!("{} input rows vs {} target rows", x.rows(), y.rows())));
    }
    if x.cols() != spec.input_dim() || y.cols() != spec.output_dim() {
        return Err(NeuralError::DimensionMismatch(format!(
            "data is {}->{} but network is {}->{}",
            x.cols(),
            y.cols(),
            spec.input_dim(),
            spec.output_dim()
        )));
    }
    config.validate(x.rows())?;

    let mut shuffle_rng = Rng::new(derive_seed(config.seed, 1));
    let mut optimizer = Optimizer::new(config, &params);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x.select_rows(batch);
            let yb = y.select_rows(batch);
            let cache = forward_unchecked(spec, &params, &xb)?;
            let l = loss_value(config.loss, cache.output(), &yb)?;
            if !l.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch });
            }
            total += l * batch.len() as f64;
            let grads = backward_unchecked(spec, &params, &cache, &yb, config.loss)?;
            optimizer.step(&mut params, &grads);
        }
        let mean = total / x.rows() as f64;
        if !mean.is_finite() || params.check(spec).is_err() {
            return Err(NeuralError::NonFiniteLoss { epoch });
        }
        history.push(mean);
    }
    Ok(TrainOutcome { params, loss_history: history })
}
