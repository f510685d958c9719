//! Exact Gaussian process regression from position to acceleration.
//!
//! Three independent single-output GPs (one per acceleration component),
//! each with a constant mean and an ARD radial-basis kernel. Hyperparameters
//! live in log space and are fitted by Adam ascent on the exact marginal log
//! likelihood with analytic gradients.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::SampledDataset;
use crate::linalg::{cholesky_lower, cholesky_solve, spd_inverse_from_lower};
use crate::optim::AdamState;
use crate::{Error, Regressor, Result, Vec3};

/// Largest jitter (relative to the signal variance) tried before a
/// factorization is declared unstable.
pub const MAX_RELATIVE_JITTER: f64 = 1e-2;
/// Hard cap on the exact-GP training size.
pub const MAX_TRAINING_POINTS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub log_lengthscales: [f64; 3],
    pub log_signal_variance: f64,
    pub log_noise_variance: f64,
    pub constant_mean: f64,
}

impl GpHyperparams {
    /// Unit lengthscales and signal variance, noise variance `1e-2`.
    pub fn initial(constant_mean: f64) -> Self {
        Self {
            log_lengthscales: [0.0; 3],
            log_signal_variance: 0.0,
            log_noise_variance: (1e-2f64).ln(),
            constant_mean,
        }
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }

    pub fn lengthscales(&self) -> [f64; 3] {
        self.log_lengthscales.map(f64::exp)
    }

    fn to_array(self) -> [f64; 6] {
        [
            self.log_lengthscales[0],
            self.log_lengthscales[1],
            self.log_lengthscales[2],
            self.log_signal_variance,
            self.log_noise_variance,
            self.constant_mean,
        ]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            log_lengthscales: [a[0], a[1], a[2]],
            log_signal_variance: a[3],
            log_noise_variance: a[4],
            constant_mean: a[5],
        }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
            && self.signal_variance().is_finite()
            && self.noise_variance().is_finite()
            && self.lengthscales().iter().all(|l| l.is_finite() && *l > 0.0)
    }
}

/// `sf2 * exp(-0.5 * sum_d (x1_d - x2_d)^2 / l_d^2)`
pub fn rbf_kernel(x1: &Vec3, x2: &Vec3, hp: &GpHyperparams) -> f64 {
    let inv_l2 = hp.log_lengthscales.map(|l| (-2.0 * l).exp());
    let d = x1 - x2;
    let q = d.x * d.x * inv_l2[0] + d.y * d.y * inv_l2[1] + d.z * d.z * inv_l2[2];
    hp.signal_variance() * (-0.5 * q).exp()
}

/// Squared coordinate differences for every input pair, one matrix per axis.
struct PairwiseSq {
    n: usize,
    axes: [Vec<f64>; 3],
}

impl PairwiseSq {
    fn new(inputs: &[Vec3]) -> Self {
        let n = inputs.len();
        let axes = [0, 1, 2].map(|d| {
            let mut m = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let diff = inputs[i][d] - inputs[j][d];
                    m[j * n + i] = diff * diff;
                }
            }
            m
        });
        Self { n, axes }
    }

    /// Noise-free kernel matrix, column-major.
    fn kernel(&self, hp: &GpHyperparams) -> DMatrix<f64> {
        let inv_l2 = hp.log_lengthscales.map(|l| (-2.0 * l).exp());
        let sf2 = hp.signal_variance();
        let n = self.n;
        let data: Vec<f64> = (0..n * n)
            .map(|k| {
                let q = self.axes[0][k] * inv_l2[0] + self.axes[1][k] * inv_l2[1] + self.axes[2][k] * inv_l2[2];
                sf2 * (-0.5 * q).exp()
            })
            .collect();
        DMatrix::from_vec(n, n, data)
    }
}

/// Result of one likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MllEvaluation {
    pub value: f64,
    /// Ordered as lengthscales (3), log signal variance, log noise variance,
    /// constant mean.
    pub gradient: [f64; 6],
    /// Absolute jitter that was added to the diagonal.
    pub jitter: f64,
}

/// Factors `K + sn2 I`; if that fails, adds a jitter starting at
/// `jitter_rel` times the signal variance and escalating by 10x up to
/// [`MAX_RELATIVE_JITTER`].
fn factor_with_jitter(kf: &DMatrix<f64>, hp: &GpHyperparams, jitter_rel: f64) -> Option<(DMatrix<f64>, f64)> {
    factor_with_jitter_upto(kf, hp, jitter_rel, MAX_RELATIVE_JITTER)
}

fn factor_with_jitter_upto(
    kf: &DMatrix<f64>,
    hp: &GpHyperparams,
    jitter_rel: f64,
    max_rel: f64,
) -> Option<(DMatrix<f64>, f64)> {
    let sf2 = hp.signal_variance();
    let sn2 = hp.noise_variance();
    // plain factorization first; jitter only once that fails
    let mut rel = 0.0;
    loop {
        let jitter = rel * sf2;
        let mut k = kf.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += sn2 + jitter;
        }
        if let Some(l) = cholesky_lower(k) {
            return Some((l, jitter));
        }
        if rel == 0.0 {
            rel = if jitter_rel > 0.0 { jitter_rel } else { 1e-10 };
        } else if rel >= max_rel {
            return None;
        } else {
            rel = (rel * 10.0).min(max_rel);
        }
    }
}

fn mll_from_factor(l: &DMatrix<f64>, alpha: &DVector<f64>, resid: &DVector<f64>) -> f64 {
    let n = l.nrows() as f64;
    let log_det_half: f64 = l.diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * resid.dot(alpha) - log_det_half - 0.5 * n * (2.0 * PI).ln()
}

fn residuals(targets: &[f64], mean: f64) -> DVector<f64> {
    DVector::from_iterator(targets.len(), targets.iter().map(|y| y - mean))
}

/// Exact marginal log likelihood of one output component. The constant mean
/// of `hp` is subtracted from `targets`; `jitter_rel` is the starting jitter
/// relative to the signal variance.
pub fn marginal_log_likelihood(hp: &GpHyperparams, inputs: &[Vec3], targets: &[f64], jitter_rel: f64) -> Result<f64> {
    check_sizes(inputs, targets)?;
    let pw = PairwiseSq::new(inputs);
    let kf = pw.kernel(hp);
    let (l, _) = factor_with_jitter(&kf, hp, jitter_rel)
        .ok_or_else(|| Error::Instability("Cholesky failed at maximum jitter".into()))?;
    let resid = residuals(targets, hp.constant_mean);
    let alpha = cholesky_solve(&l, &resid);
    let v = mll_from_factor(&l, &alpha, &resid);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Instability("marginal likelihood is not finite".into()))
    }
}

/// Marginal log likelihood and its analytic gradient with respect to the
/// log-hyperparameters and the constant mean.
pub fn marginal_log_likelihood_with_gradient(
    hp: &GpHyperparams,
    inputs: &[Vec3],
    targets: &[f64],
    jitter_rel: f64,
) -> Result<MllEvaluation> {
    check_sizes(inputs, targets)?;
    let pw = PairwiseSq::new(inputs);
    mll_grad(&pw, hp, targets, jitter_rel)
}

fn check_sizes(inputs: &[Vec3], targets: &[f64]) -> Result<()> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Config(format!(
            "GP needs matching nonempty inputs/targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

fn mll_grad(pw: &PairwiseSq, hp: &GpHyperparams, targets: &[f64], jitter_rel: f64) -> Result<MllEvaluation> {
    let n = pw.n;
    let kf = pw.kernel(hp);
    let (l, jitter) = factor_with_jitter(&kf, hp, jitter_rel)
        .ok_or_else(|| Error::Instability("Cholesky failed at maximum jitter".into()))?;
    let resid = residuals(targets, hp.constant_mean);
    let kinv = spd_inverse_from_lower(&l);
    let alpha = &kinv * &resid;
    let value = mll_from_factor(&l, &alpha, &resid);

    // dMLL/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
    let inv_l2 = hp.log_lengthscales.map(|v| (-2.0 * v).exp());
    let ks = kf.as_slice();
    let kinv_s = kinv.as_slice();
    let a = alpha.as_slice();
    let mut g_axes = [0.0; 3];
    let mut g_sf = 0.0;
    let mut trace_w = 0.0;
    for j in 0..n {
        let aj = a[j];
        let base = j * n;
        for i in 0..n {
            let k = base + i;
            let w = a[i] * aj - kinv_s[k];
            let wk = w * ks[k];
            g_sf += wk;
            g_axes[0] += wk * pw.axes[0][k];
            g_axes[1] += wk * pw.axes[1][k];
            g_axes[2] += wk * pw.axes[2][k];
        }
        trace_w += aj * aj - kinv_s[base + j];
    }
    let sn2 = hp.noise_variance();
    // the jitter scales with the signal variance
    let gradient = [
        0.5 * g_axes[0] * inv_l2[0],
        0.5 * g_axes[1] * inv_l2[1],
        0.5 * g_axes[2] * inv_l2[2],
        0.5 * (g_sf + jitter * trace_w),
        0.5 * sn2 * trace_w,
        a.iter().sum(),
    ];
    if !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Instability("marginal likelihood or gradient is not finite".into()));
    }
    Ok(MllEvaluation { value, gradient, jitter })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Starting jitter relative to the signal variance.
    pub jitter: f64,
    /// Number of evenly strided training points used for the hyperparameter
    /// fit. The posterior always conditions on every training point.
    pub fit_points: Option<usize>,
}

impl Default for GpTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.01,
            jitter: 1e-6,
            fit_points: Some(400),
        }
    }
}

impl GpTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("GP epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("GP learning rate must be positive".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter <= MAX_RELATIVE_JITTER) {
            return Err(Error::Config("GP jitter must lie in [0, 1e-2]".into()));
        }
        if self.fit_points == Some(0) || self.fit_points == Some(1) {
            return Err(Error::Config("GP fit_points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDiagnostics {
    pub initial_mll: f64,
    /// Summed marginal log likelihood of the three outputs at the final state.
    pub final_mll: f64,
    /// Negated final MLL per fitted point.
    pub final_loss: f64,
    pub epochs_run: [usize; 3],
    pub fit_points: usize,
    pub instability_flag: bool,
    pub jitter: [f64; 3],
}

/// A trained three-output GP with its cached posterior factors.
#[derive(Debug, Clone)]
pub struct TrainedGp {
    pub hyperparams: [GpHyperparams; 3],
    pub inputs: Vec<Vec3>,
    pub targets: Vec<Vec3>,
    pub diagnostics: GpDiagnostics,
    factors: Vec<DMatrix<f64>>,
    alphas: Vec<DVector<f64>>,
}

fn component(targets: &[Vec3], d: usize) -> Vec<f64> {
    targets.iter().map(|t| t[d]).collect()
}

fn strided_subset(n: usize, m: usize) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    (0..m).map(|i| i * n / m).collect()
}

struct OutputFit {
    hp: GpHyperparams,
    initial: f64,
    last: f64,
    epochs: usize,
    unstable: bool,
}

fn fit_output(pw: &PairwiseSq, targets: &[f64], cfg: &GpTrainConfig) -> OutputFit {
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut hp = GpHyperparams::initial(mean);
    let mut adam = AdamState::new(6);
    let mut initial = f64::NAN;
    let mut last = f64::NAN;
    for epoch in 0..cfg.epochs {
        let eval = match mll_grad(pw, &hp, targets, cfg.jitter) {
            Ok(e) => e,
            Err(_) => {
                return OutputFit {
                    hp,
                    initial,
                    last,
                    epochs: epoch,
                    unstable: true,
                };
            }
        };
        if epoch == 0 {
            initial = eval.value;
        }
        last = eval.value;
        let mut params = hp.to_array();
        // ascent on the likelihood
        let neg: Vec<f64> = eval.gradient.iter().map(|g| -g).collect();
        adam.descend(&mut params, &neg, cfg.learning_rate, epoch as u64 + 1);
        let next = GpHyperparams::from_array(params);
        if !next.is_finite() {
            return OutputFit {
                hp,
                initial,
                last,
                epochs: epoch + 1,
                unstable: true,
            };
        }
        hp = next;
    }
    match mll_grad(pw, &hp, targets, cfg.jitter) {
        Ok(e) => OutputFit {
            hp,
            initial,
            last: e.value,
            epochs: cfg.epochs,
            unstable: false,
        },
        Err(_) => OutputFit {
            hp,
            initial,
            last,
            epochs: cfg.epochs,
            unstable: true,
        },
    }
}

/// Fits hyperparameters for exactly `cfg.epochs` full-batch Adam steps per
/// output and caches the posterior over the whole training set.
pub fn train_gp(ds: &SampledDataset, cfg: &GpTrainConfig) -> Result<TrainedGp> {
    cfg.validate()?;
    let n = ds.len();
    if n < 2 {
        return Err(Error::Config(format!("GP training needs at least 2 samples, got {n}")));
    }
    if n > MAX_TRAINING_POINTS {
        return Err(Error::Config(format!(
            "exact GP limited to {MAX_TRAINING_POINTS} training points, got {n}"
        )));
    }
    let subset = strided_subset(n, cfg.fit_points.unwrap_or(n));
    let fit_inputs: Vec<Vec3> = subset.iter().map(|&i| ds.inputs[i]).collect();
    let pw = PairwiseSq::new(&fit_inputs);

    let mut hps = [GpHyperparams::initial(0.0); 3];
    let mut initial = 0.0;
    let mut final_mll = 0.0;
    let mut epochs_run = [0; 3];
    let mut unstable = false;
    for d in 0..3 {
        let y: Vec<f64> = subset.iter().map(|&i| ds.targets[i][d]).collect();
        let fit = fit_output(&pw, &y, cfg);
        hps[d] = fit.hp;
        initial += fit.initial;
        final_mll += fit.last;
        epochs_run[d] = fit.epochs;
        unstable |= fit.unstable;
    }
    if unstable {
        log::warn!("GP hyperparameter fit hit a numerical instability; state frozen");
    }
    let fit_n = subset.len();
    let (model, posterior_unstable) = TrainedGp::condition(
        hps,
        ds.inputs.clone(),
        ds.targets.clone(),
        cfg.jitter,
        GpDiagnostics {
            initial_mll: initial,
            final_mll,
            final_loss: -final_mll / fit_n as f64,
            epochs_run,
            fit_points: fit_n,
            instability_flag: unstable,
            jitter: [0.0; 3],
        },
    )?;
    if posterior_unstable {
        log::warn!("GP posterior factorization needed jitter beyond the stable range");
    }
    Ok(model)
}

impl TrainedGp {
    /// Builds the posterior factors for fixed hyperparameters. Returns the
    /// model and whether the factorization needed more than the allowed
    /// jitter (which also sets the instability flag).
    pub fn condition(
        hyperparams: [GpHyperparams; 3],
        inputs: Vec<Vec3>,
        targets: Vec<Vec3>,
        jitter_rel: f64,
        mut diagnostics: GpDiagnostics,
    ) -> Result<(Self, bool)> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(Error::Config("GP posterior needs matching nonempty data".into()));
        }
        let pw = PairwiseSq::new(&inputs);
        let mut factors = Vec::with_capacity(3);
        let mut alphas = Vec::with_capacity(3);
        let mut escalated = false;
        for (d, hp) in hyperparams.iter().enumerate() {
            let kf = pw.kernel(hp);
            let (l, jitter) = match factor_with_jitter(&kf, hp, jitter_rel) {
                Some(f) => f,
                None => {
                    escalated = true;
                    factor_with_jitter_upto(&kf, hp, MAX_RELATIVE_JITTER, 1e3).ok_or_else(|| {
                        Error::Instability("posterior covariance could not be factored".into())
                    })?
                }
            };
            let resid = residuals(&component(&targets, d), hp.constant_mean);
            alphas.push(cholesky_solve(&l, &resid));
            factors.push(l);
            diagnostics.jitter[d] = jitter;
        }
        diagnostics.instability_flag |= escalated;
        Ok((
            Self {
                hyperparams,
                inputs,
                targets,
                diagnostics,
                factors,
                alphas,
            },
            escalated,
        ))
    }

    /// Rebuilds a model from stored hyperparameters and the absolute jitter
    /// recorded at training time.
    pub fn restore(
        hyperparams: [GpHyperparams; 3],
        inputs: Vec<Vec3>,
        targets: Vec<Vec3>,
        diagnostics: GpDiagnostics,
    ) -> Result<Self> {
        let pw = PairwiseSq::new(&inputs);
        let mut factors = Vec::with_capacity(3);
        let mut alphas = Vec::with_capacity(3);
        for (d, hp) in hyperparams.iter().enumerate() {
            let mut k = pw.kernel(hp);
            for i in 0..k.nrows() {
                k[(i, i)] += hp.noise_variance() + diagnostics.jitter[d];
            }
            let l = cholesky_lower(k).ok_or_else(|| Error::Instability("stored GP does not factor".into()))?;
            let resid = residuals(&component(&targets, d), hp.constant_mean);
            alphas.push(cholesky_solve(&l, &resid));
            factors.push(l);
        }
        Ok(Self {
            hyperparams,
            inputs,
            targets,
            diagnostics,
            factors,
            alphas,
        })
    }

    fn cross_kernel(&self, d: usize, x: &Vec3) -> DVector<f64> {
        let hp = &self.hyperparams[d];
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| rbf_kernel(x, xi, hp)))
    }

    pub fn predict_mean(&self, positions: &[Vec3]) -> Vec<Vec3> {
        positions
            .iter()
            .map(|x| {
                let mut m = Vec3::zeros();
                for d in 0..3 {
                    m[d] = self.hyperparams[d].constant_mean + self.cross_kernel(d, x).dot(&self.alphas[d]);
                }
                m
            })
            .collect()
    }
}

/// Posterior means and marginal (latent) variances per output dimension.
pub fn predict_gp(model: &TrainedGp, positions: &[Vec3]) -> (Vec<Vec3>, Vec<Vec3>) {
    let means = model.predict_mean(positions);
    let mut vars = vec![Vec3::zeros(); positions.len()];
    const CHUNK: usize = 256;
    for (c, chunk) in positions.chunks(CHUNK).enumerate() {
        for d in 0..3 {
            let hp = &model.hyperparams[d];
            let kstar = DMatrix::from_fn(model.inputs.len(), chunk.len(), |i, j| {
                rbf_kernel(&model.inputs[i], &chunk[j], hp)
            });
            let v = model.factors[d]
                .solve_lower_triangular(&kstar)
                .expect("factor has positive diagonal");
            for j in 0..chunk.len() {
                let reduction = v.column(j).norm_squared();
                vars[c * CHUNK + j][d] = (hp.signal_variance() - reduction).max(0.0);
            }
        }
    }
    (means, vars)
}

impl Regressor for TrainedGp {
    fn predict(&self, positions: &[Vec3]) -> Vec<Vec3> {
        self.predict_mean(positions)
    }

    fn unstable(&self) -> bool {
        self.diagnostics.instability_flag
    }
}
