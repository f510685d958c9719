//! Spectrally normalized multilayer perceptron: 3 inputs, six hidden ReLU
//! layers of width 80, 3 outputs.
//!
//! Each of the seven affine layers keeps a power-iteration pair `(u, v)`.
//! The effective weight is `W * min(1, s / sigma)` with `sigma = u^T W v` and
//! per-layer budget `s = gamma^(1/7)`, so the whole network is
//! `gamma`-Lipschitz up to the accuracy of the singular value estimate.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::SampledDataset;
use crate::optim::AdamState;
use crate::seed;
use crate::{Error, Regressor, Result, Vec3};

pub const INPUT_DIM: usize = 3;
pub const OUTPUT_DIM: usize = 3;
pub const HIDDEN_LAYERS: usize = 6;
pub const HIDDEN_WIDTH: usize = 80;
pub const AFFINE_LAYERS: usize = HIDDEN_LAYERS + 1;
/// Power iterations run once after training so inference uses settled
/// singular vectors.
const SETTLE_ITERATIONS: usize = 10;

/// Output of one spectral normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNorm {
    pub weight: DMatrix<f64>,
    pub sigma: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

fn normalize_or_keep(x: DVector<f64>, fallback: &DVector<f64>) -> DVector<f64> {
    let n = x.norm();
    if n > 0.0 && n.is_finite() {
        x / n
    } else {
        fallback.clone()
    }
}

/// Runs `iterations` power-iteration updates of `(u, v)`, estimates the
/// largest singular value as `u^T W v`, and scales `W` down only if the
/// estimate exceeds `layer_budget`.
pub fn spectral_normalize(
    weight: &DMatrix<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    iterations: usize,
    layer_budget: f64,
) -> SpectralNorm {
    let mut u = u.clone();
    let mut v = v.clone();
    for _ in 0..iterations {
        let wtu = weight.tr_mul(&u);
        if wtu.norm() == 0.0 {
            return SpectralNorm {
                weight: weight.clone(),
                sigma: 0.0,
                u,
                v,
            };
        }
        v = normalize_or_keep(wtu, &v);
        u = normalize_or_keep(weight * &v, &u);
    }
    let sigma = u.dot(&(weight * &v));
    let scale = layer_scale(sigma, layer_budget);
    SpectralNorm {
        weight: weight * scale,
        sigma,
        u,
        v,
    }
}

fn layer_scale(sigma: f64, budget: f64) -> f64 {
    if sigma > budget {
        budget / sigma
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Raw (unnormalized) weight, `out x in`.
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

impl Layer {
    fn sigma(&self) -> f64 {
        self.u.dot(&(&self.weight * &self.v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` means `min(64, N)`.
    pub batch_size: Option<usize>,
    pub lipschitz_budget: f64,
    pub seed: u64,
}

impl Default for NnTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-3,
            batch_size: None,
            lipschitz_budget: 100.0,
            seed: 0,
        }
    }
}

impl NnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("NN epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("NN learning rate must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("NN batch size must be at least 1".into()));
        }
        if !(self.lipschitz_budget > 0.0 && self.lipschitz_budget.is_finite()) {
            return Err(Error::Config("Lipschitz budget must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_batch_size(&self, n: usize) -> usize {
        self.batch_size.unwrap_or_else(|| n.min(64)).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NnDiagnostics {
    pub initial_mse: f64,
    pub final_mse: f64,
    pub epochs_run: usize,
    pub optimizer_steps: u64,
    pub nonfinite_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    pub layers: Vec<Layer>,
    pub lipschitz_budget: f64,
    pub diagnostics: NnDiagnostics,
}

/// Per-layer activations kept for backpropagation.
struct Tape {
    /// `inputs[l]` is the input to layer `l` (post-activation of `l - 1`).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<DMatrix<f64>>,
}

/// Gradients of the loss with respect to the raw parameters.
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

fn unit_normal<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        DVector::from_element(n, 1.0 / (n as f64).sqrt())
    }
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut col in z.column_iter_mut() {
        col += b;
    }
}

fn layer_dims() -> Vec<(usize, usize)> {
    let mut dims = vec![(INPUT_DIM, HIDDEN_WIDTH)];
    dims.extend(std::iter::repeat_n((HIDDEN_WIDTH, HIDDEN_WIDTH), HIDDEN_LAYERS - 1));
    dims.push((HIDDEN_WIDTH, OUTPUT_DIM));
    dims
}

impl MlpNetwork {
    /// He-initialized weights, zero biases, random unit power-iteration vectors.
    pub fn new(lipschitz_budget: f64, rng_seed: u64) -> Self {
        let mut rng = seed::rng(rng_seed);
        let layers = layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let std = (2.0 / fan_in as f64).sqrt();
                let weight = DMatrix::from_fn(fan_out, fan_in, |_, _| std * rng.sample::<f64, _>(StandardNormal));
                let u = unit_normal(fan_out, &mut rng);
                let v = unit_normal(fan_in, &mut rng);
                Layer {
                    weight,
                    bias: DVector::zeros(fan_out),
                    u,
                    v,
                }
            })
            .collect();
        Self {
            layers,
            lipschitz_budget,
            diagnostics: NnDiagnostics::default(),
        }
    }

    /// Per-layer share of the Lipschitz budget, `gamma^(1/L)`.
    pub fn layer_budget(&self) -> f64 {
        self.lipschitz_budget.powf(1.0 / self.layers.len() as f64)
    }

    /// Current singular value estimates `u^T W v` of every layer.
    pub fn sigma_estimates(&self) -> Vec<f64> {
        self.layers.iter().map(Layer::sigma).collect()
    }

    /// Effective weights with the current `(u, v)`; returns `(W_eff, scale, sigma)`.
    pub fn normalized_weights(&self) -> Vec<(DMatrix<f64>, f64, f64)> {
        let budget = self.layer_budget();
        self.layers
            .iter()
            .map(|l| {
                let sigma = l.sigma();
                let scale = layer_scale(sigma, budget);
                (&l.weight * scale, scale, sigma)
            })
            .collect()
    }

    fn forward_batch(&self, weights: &[(DMatrix<f64>, f64, f64)], x: &DMatrix<f64>, tape: Option<&mut Tape>) -> DMatrix<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        let mut record = tape;
        for (l, (layer, (w, _, _))) in self.layers.iter().zip(weights).enumerate() {
            let mut z = w * &a;
            add_bias(&mut z, &layer.bias);
            if let Some(t) = record.as_deref_mut() {
                t.inputs.push(a);
                t.pre.push(z.clone());
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            a = z;
        }
        a
    }

    pub fn forward(&self, position: &Vec3) -> Vec3 {
        let out = predict_nn(self, std::slice::from_ref(position));
        out[0]
    }

    /// Mean squared error over all outputs and its gradient with respect to
    /// the raw weights and biases, treating `(u, v)` as constants.
    pub fn mse_gradients(&self, inputs: &[Vec3], targets: &[Vec3]) -> (f64, Gradients) {
        let weights = self.normalized_weights();
        let x = to_columns(inputs);
        let y = to_columns(targets);
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let pred = self.forward_batch(&weights, &x, Some(&mut tape));
        let diff = pred - y;
        let denom = diff.len() as f64;
        let loss = diff.norm_squared() / denom;
        let mut delta = diff * (2.0 / denom);

        let n_layers = self.layers.len();
        let mut gw = vec![DMatrix::zeros(0, 0); n_layers];
        let mut gb = vec![DVector::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let (w_eff, scale, sigma) = &weights[l];
            let g_eff = &delta * tape.inputs[l].transpose();
            gb[l] = delta.column_sum();
            if l > 0 {
                let mut back = w_eff.transpose() * &delta;
                back.zip_apply(&tape.pre[l - 1], |g, z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
                delta = back;
            }
            gw[l] = if *scale < 1.0 {
                let layer = &self.layers[l];
                let inner = g_eff.dot(w_eff);
                &g_eff * *scale - (&layer.u * layer.v.transpose()) * (inner / sigma)
            } else {
                g_eff
            };
        }
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    fn power_iteration_step(&mut self) {
        for layer in &mut self.layers {
            let wtu = layer.weight.tr_mul(&layer.u);
            if wtu.norm() == 0.0 {
                continue;
            }
            layer.v = normalize_or_keep(wtu, &layer.v);
            layer.u = normalize_or_keep(&layer.weight * &layer.v, &layer.u);
        }
    }

    pub fn mse(&self, inputs: &[Vec3], targets: &[Vec3]) -> f64 {
        let pred = predict_nn(self, inputs);
        let sum: f64 = pred.iter().zip(targets).map(|(p, t)| (p - t).norm_squared()).sum();
        sum / (3 * inputs.len()).max(1) as f64
    }
}

fn to_columns(v: &[Vec3]) -> DMatrix<f64> {
    DMatrix::from_fn(3, v.len(), |i, j| v[j][i])
}

/// Adam on the mean squared error for exactly `cfg.epochs` epochs, one power
/// iteration per layer per optimizer step.
pub fn train_nn(ds: &SampledDataset, cfg: &NnTrainConfig) -> Result<MlpNetwork> {
    cfg.validate()?;
    let n = ds.len();
    let batch = cfg.effective_batch_size(n);
    if n == 0 || n < batch {
        return Err(Error::Config(format!("NN training needs at least {batch} samples, got {n}")));
    }
    let mut net = MlpNetwork::new(cfg.lipschitz_budget, cfg.seed);
    let mut shuffle_rng = seed::rng(seed::derive_seed(cfg.seed, 0, "nn-batches"));
    let mut adam_w: Vec<AdamState> = net.layers.iter().map(|l| AdamState::new(l.weight.len())).collect();
    let mut adam_b: Vec<AdamState> = net.layers.iter().map(|l| AdamState::new(l.bias.len())).collect();
    net.diagnostics.initial_mse = net.mse(&ds.inputs, &ds.targets);

    let mut order: Vec<usize> = (0..n).collect();
    let mut step: u64 = 0;
    let mut xb = Vec::with_capacity(batch);
    let mut yb = Vec::with_capacity(batch);
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(batch) {
            net.power_iteration_step();
            xb.clear();
            yb.clear();
            xb.extend(chunk.iter().map(|&i| ds.inputs[i]));
            yb.extend(chunk.iter().map(|&i| ds.targets[i]));
            let (loss, grads) = net.mse_gradients(&xb, &yb);
            step += 1;
            if !loss.is_finite() {
                net.diagnostics.nonfinite_flag = true;
                net.diagnostics.epochs_run = epoch;
                log::warn!("NN loss became non-finite at step {step}; training halted");
                break 'epochs;
            }
            for (l, layer) in net.layers.iter_mut().enumerate() {
                adam_w[l].descend(layer.weight.as_mut_slice(), grads.weights[l].as_slice(), cfg.learning_rate, step);
                adam_b[l].descend(layer.bias.as_mut_slice(), grads.biases[l].as_slice(), cfg.learning_rate, step);
            }
        }
        net.diagnostics.epochs_run = epoch + 1;
    }
    net.diagnostics.optimizer_steps = step;
    for _ in 0..SETTLE_ITERATIONS {
        net.power_iteration_step();
    }
    net.diagnostics.final_mse = net.mse(&ds.inputs, &ds.targets);
    if !net.diagnostics.final_mse.is_finite() {
        net.diagnostics.nonfinite_flag = true;
    }
    Ok(net)
}

/// Batched forward pass; order preserved, independent of batching.
pub fn predict_nn(net: &MlpNetwork, positions: &[Vec3]) -> Vec<Vec3> {
    let weights = net.normalized_weights();
    let mut out = Vec::with_capacity(positions.len());
    for chunk in positions.chunks(1024) {
        let y = net.forward_batch(&weights, &to_columns(chunk), None);
        out.extend(y.column_iter().map(|c| Vec3::new(c[0], c[1], c[2])));
    }
    out
}

impl Regressor for MlpNetwork {
    fn predict(&self, positions: &[Vec3]) -> Vec<Vec3> {
        predict_nn(self, positions)
    }

    fn unstable(&self) -> bool {
        self.diagnostics.nonfinite_flag
    }
}
