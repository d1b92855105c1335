//! Central finite-difference verification of `backward`.

use serde::Serialize;

use super::{backward, forward, forward_from, loss_value, one_hot, Loss, NetworkParams, NetworkSpec, Result};
use crate::numerics::{derive_seed, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub n_samples: usize,
    pub tolerance: f64,
    pub epsilon: f64,
    /// Check at most this many weight entries (and biases) per layer, chosen at
    /// random; `None` checks every entry.
    pub max_entries_per_layer: Option<usize>,
    /// Relative errors use `max(|analytic|, |numeric|, floor)` as denominator.
    pub denominator_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            n_samples: 5,
            tolerance: 1e-4,
            epsilon: 1e-5,
            max_entries_per_layer: None,
            denominator_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamKind {
    Weight,
    Bias,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub architecture: String,
    pub loss: &'static str,
    pub n_checked: usize,
    pub max_relative_error: f64,
    /// `(layer, kind, flat index)` of the worst entry.
    pub worst: Option<(usize, ParamKind, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Draws a random point (parameters, inputs in `[0, 1)`, loss-appropriate
/// targets) from `opts.seed` and compares analytic to numeric gradients.
pub fn gradient_check(spec: &NetworkSpec, loss: Loss, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = Rng::new(derive_seed(opts.seed, 0));
    let mut params = NetworkParams::init(spec, &mut rng);
    for layer in &mut params.layers {
        layer.bias.iter_mut().for_each(|b| *b = rng.uniform(-0.1, 0.1));
    }
    let n = opts.n_samples.max(1);
    let x = Matrix::from_vec(n, spec.input_dim(), (0..n * spec.input_dim()).map(|_| rng.next_f64()).collect())?;
    let out_dim = spec.output_dim();
    let y = match loss {
        Loss::CategoricalCrossEntropy => {
            let labels: Vec<usize> = (0..n).map(|_| rng.below(out_dim as u64) as usize).collect();
            one_hot(&labels, out_dim)
        }
        Loss::BinaryCrossEntropy => {
            Matrix::from_vec(n, out_dim, (0..n * out_dim).map(|_| rng.below(2) as f64).collect())?
        }
        Loss::MeanSquaredError => Matrix::from_vec(n, out_dim, (0..n * out_dim).map(|_| rng.next_f64()).collect())?,
    };
    gradient_check_at(spec, &params, &x, &y, loss, opts)
}

/// Compares `backward` with central differences at the given point.
pub fn gradient_check_at(
    spec: &NetworkSpec,
    params: &NetworkParams,
    x: &Matrix,
    y: &Matrix,
    loss: Loss,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let cache = forward(spec, params, x)?;
    let analytic = backward(spec, params, &cache, y, loss)?;
    let mut pick_rng = Rng::new(derive_seed(opts.seed, 1));

    let mut report = GradCheckReport {
        architecture: spec.describe(),
        loss: loss.name(),
        n_checked: 0,
        max_relative_error: 0.0,
        worst: None,
        tolerance: opts.tolerance,
        passed: true,
    };

    let mut probe = params.clone();
    for layer in 0..spec.layers().len() {
        let layer_input = cache.layer_input(layer);
        for kind in [ParamKind::Weight, ParamKind::Bias] {
            let len = match kind {
                ParamKind::Weight => params.layers[layer].weights.as_slice().len(),
                ParamKind::Bias => params.layers[layer].bias.len(),
            };
            let indices = choose(len, opts.max_entries_per_layer, &mut pick_rng);
            for idx in indices {
                let original = param(&probe, layer, kind, idx);
                *param_mut(&mut probe, layer, kind, idx) = original + opts.epsilon;
                let plus = loss_value(loss, &forward_from(spec, &probe, layer, layer_input)?, y)?;
                *param_mut(&mut probe, layer, kind, idx) = original - opts.epsilon;
                let minus = loss_value(loss, &forward_from(spec, &probe, layer, layer_input)?, y)?;
                *param_mut(&mut probe, layer, kind, idx) = original;

                let numeric = (plus - minus) / (2.0 * opts.epsilon);
                let a = param(&analytic, layer, kind, idx);
                let denom = a.abs().max(numeric.abs()).max(opts.denominator_floor);
                let rel = (a - numeric).abs() / denom;
                report.n_checked += 1;
                if report.worst.is_none() || rel > report.max_relative_error {
                    report.max_relative_error = rel;
                    report.worst = Some((layer, kind, idx));
                }
            }
        }
    }
    report.passed = report.max_relative_error < opts.tolerance;
    Ok(report)
}

fn param(p: &NetworkParams, layer: usize, kind: ParamKind, idx: usize) -> f64 {
    match kind {
        ParamKind::Weight => p.layers[layer].weights.as_slice()[idx],
        ParamKind::Bias => p.layers[layer].bias[idx],
    }
}

fn param_mut(p: &mut NetworkParams, layer: usize, kind: ParamKind, idx: usize) -> &mut f64 {
    match kind {
        ParamKind::Weight => &mut p.layers[layer].weights.as_mut_slice()[idx],
        ParamKind::Bias => &mut p.layers[layer].bias[idx],
    }
}

fn choose(len: usize, cap: Option<usize>, rng: &mut Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..len).collect();
    match cap {
        Some(c) if c < len => {
            rng.shuffle(&mut all);
            all.truncate(c);
            all.sort_unstable();
            all
        }
        _ => all,
    }
}
