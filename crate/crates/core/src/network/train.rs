//! Projected stochastic gradient training.
//!
//! Each minibatch step is followed by the projection onto non-negative
//! weights (for monotone networks), so every iterate, and in particular the
//! returned network, keeps the sign constraint.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{LossParams, Objective};
use super::mlp::{Gradients, InputMap, Mlp, MonotoneMlp, OutputMap, Scratch};
use crate::cover::MajoringPointSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Network shape used when a fresh network is created.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub width: usize,
    pub theta: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            depth: 4,
            width: 64,
            theta: 1.0,
        }
    }
}

/// How the network grows after a failed verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowPolicy {
    /// Total training attempts, the first one included.
    pub max_attempts: usize,
    pub width_factor: usize,
    pub depth_step: usize,
}

impl Default for GrowPolicy {
    fn default() -> Self {
        GrowPolicy {
            max_attempts: 3,
            width_factor: 2,
            depth_step: 1,
        }
    }
}

impl GrowPolicy {
    /// Architecture of attempt `k` (0-based): widen on odd attempts, deepen
    /// on even ones.
    pub fn architecture(&self, base: Architecture, k: usize) -> Architecture {
        let widen = k.div_ceil(2);
        let deepen = k / 2;
        Architecture {
            width: base.width * self.width_factor.pow(widen as u32),
            depth: base.depth + self.depth_step * deepen,
            theta: base.theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub loss: LossParams,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Learning rate reached at the last epoch.
    pub lr_final: f64,
    /// Fraction of the epochs run at constant `lr` before the geometric decay.
    pub decay_start: f64,
    pub seed: u64,
    pub grow: GrowPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            arch: Architecture::default(),
            loss: LossParams::default(),
            optimizer: Optimizer::adam(),
            epochs: 3000,
            batch_size: 32,
            lr: 3e-3,
            lr_final: 1e-4,
            decay_start: 0.3,
            seed: 0,
            grow: GrowPolicy::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.epochs == 0 || self.batch_size == 0 || self.grow.max_attempts == 0 {
            return Err(Error::InvalidParameter("epochs, batch size and attempts must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr_final > 0.0 && (0.0..=1.0).contains(&self.decay_start)) {
            return Err(Error::InvalidParameter("invalid learning-rate schedule".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let start = (self.decay_start * self.epochs as f64).floor() as usize;
        if epoch < start || self.epochs <= start + 1 {
            return self.lr;
        }
        let frac = (epoch - start) as f64 / (self.epochs - start - 1) as f64;
        self.lr * (self.lr_final / self.lr).powf(frac)
    }
}

/// Per-epoch objective values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    /// Sum of minibatch losses seen during each epoch.
    pub epochs: Vec<f64>,
    /// Objective over the full training set after the last update.
    pub final_objective: f64,
}

/// `sum_i objective(net(x_i) - y_i)`.
pub fn total_objective(net: &Mlp, xs: &[&[f64]], ys: &[f64], objective: &Objective) -> f64 {
    let mut scratch = Scratch::default();
    xs.iter()
        .zip(ys)
        .map(|(x, y)| objective.value(net.forward_with(x, &mut scratch) - y))
        .sum()
}

/// Asymmetric objective `E = sum_i l(f_net(a_i) - b_i)` over Majoring Points.
pub fn objective(net: &Mlp, pts: &MajoringPointSet, lp: &LossParams) -> f64 {
    let (xs, ys) = split_points(pts);
    total_objective(net, &xs, &ys, &Objective::Asymmetric(*lp))
}

/// Objective value and exact gradient over `batch`.
pub fn gradient(net: &Mlp, batch: &[(&[f64], f64)], objective: &Objective) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = Scratch::default();
    let loss = accumulate(net, batch.iter().copied(), objective, &mut scratch, &mut grads);
    (loss, grads)
}

fn accumulate<'a>(
    net: &Mlp,
    batch: impl Iterator<Item = (&'a [f64], f64)>,
    objective: &Objective,
    scratch: &mut Scratch,
    grads: &mut Gradients,
) -> f64 {
    let mut loss = 0.0;
    for (x, y) in batch {
        let t = net.forward_with(x, scratch) - y;
        loss += objective.value(t);
        let g = objective.deriv(t);
        if g != 0.0 {
            net.backward(g, scratch, grads);
        }
    }
    loss
}

pub(crate) fn split_points(pts: &MajoringPointSet) -> (Vec<&[f64]>, Vec<f64>) {
    pts.iter().map(|p| (p.a.as_slice(), p.b)).unzip()
}

struct OptState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl OptState {
    fn new(net: &Mlp) -> Self {
        let zeros: Vec<Vec<f64>> = net
            .weights
            .iter()
            .chain(&net.biases)
            .map(|p| vec![0.0; p.len()])
            .collect();
        OptState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn apply(&mut self, opt: &Optimizer, lr: f64, net: &mut Mlp, grads: &Gradients, scale: f64) {
        self.step += 1;
        let params = net.weights.iter_mut().chain(net.biases.iter_mut());
        let gs = grads.weights.iter().chain(&grads.biases);
        for (((p, g), m), v) in params.zip(gs).zip(&mut self.m).zip(&mut self.v) {
            match *opt {
                Optimizer::Sgd { momentum } => {
                    for ((pi, gi), mi) in p.iter_mut().zip(g).zip(m.iter_mut()) {
                        *mi = momentum * *mi + gi * scale;
                        *pi -= lr * *mi;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(self.step);
                    let c2 = 1.0 - beta2.powi(self.step);
                    for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        let gi = gi * scale;
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Minibatch training of `net` on `(xs, ys)`. With `project` set, negative
/// weights are zeroed after every update. Deterministic given `cfg.seed`.
pub fn fit(
    net: &mut Mlp,
    xs: &[&[f64]],
    ys: &[f64],
    objective: &Objective,
    cfg: &TrainConfig,
    project: bool,
) -> Result<LossTrace> {
    cfg.validate()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidParameter("training needs matching non-empty inputs and targets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_ed0f_5eed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = Scratch::default();
    let mut state = OptState::new(net);
    let mut trace = LossTrace::default();
    if project {
        net.project_nonneg();
    }
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.learning_rate(epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let items = batch.iter().map(|&i| (xs[i], ys[i]));
            epoch_loss += accumulate(net, items, objective, &mut scratch, &mut grads);
            state.apply(&cfg.optimizer, lr, net, &grads, 1.0 / batch.len() as f64);
            if project {
                net.project_nonneg();
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged(epoch));
        }
        trace.epochs.push(epoch_loss);
    }
    trace.final_objective = total_objective(net, xs, ys, objective);
    if !trace.final_objective.is_finite() {
        return Err(Error::Diverged(cfg.epochs));
    }
    Ok(trace)
}

/// Fits the affine maps to the Majoring Points, then minimises the
/// asymmetric objective under the non-negativity constraint.
pub fn train(net: MonotoneMlp, pts: &MajoringPointSet, cfg: &TrainConfig) -> Result<(MonotoneMlp, LossTrace)> {
    if pts.is_empty() {
        return Err(Error::InvalidParameter("no Majoring Points to train on".into()));
    }
    let (xs, ys) = split_points(pts);
    let mut net = net.into_mlp();
    net.set_maps(InputMap::fit(pts.dim(), xs.iter().copied()), OutputMap::fit(&ys))?;
    let trace = fit(&mut net, &xs, &ys, &Objective::Asymmetric(cfg.loss), cfg, true)?;
    Ok((MonotoneMlp::try_from_mlp(net)?, trace))
}
