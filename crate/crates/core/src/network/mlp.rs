//! Fully connected networks with scaled-tanh hidden layers and a linear
//! output.
//!
//! Inputs are mapped affinely onto roughly `[-1, 1]^d` and the raw output is
//! mapped back to target units, both with positive scales, so every ordering
//! statement about the raw network carries over to original units.

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `z_k = (x_k - center_k) / half_width_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMap {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl InputMap {
    pub fn identity(d: usize) -> Self {
        InputMap {
            center: vec![0.0; d],
            half_width: vec![1.0; d],
        }
    }

    /// Maps the bounding box of `xs` onto `[-1, 1]^d`.
    pub fn fit<'a>(d: usize, xs: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for x in xs {
            for k in 0..d {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        let (center, half_width) = (0..d)
            .map(|k| {
                if lo[k] < hi[k] {
                    ((lo[k] + hi[k]) / 2.0, (hi[k] - lo[k]) / 2.0)
                } else if lo[k].is_finite() {
                    (lo[k], 1.0)
                } else {
                    (0.0, 1.0)
                }
            })
            .unzip();
        InputMap { center, half_width }
    }

    fn validate(&self, d: usize) -> Result<()> {
        check_dim(d, self.center.len())?;
        check_dim(d, self.half_width.len())?;
        let ok = self.center.iter().all(|c| c.is_finite())
            && self.half_width.iter().all(|h| h.is_finite() && *h > 0.0);
        if !ok {
            return Err(Error::InvalidModel("input map needs finite centers and positive widths".into()));
        }
        Ok(())
    }
}

/// `y = mean + scale * raw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputMap {
    pub mean: f64,
    pub scale: f64,
}

impl OutputMap {
    pub fn identity() -> Self {
        OutputMap { mean: 0.0, scale: 1.0 }
    }

    /// Standardizes the targets (unit scale when they are constant).
    pub fn fit(ys: &[f64]) -> Self {
        if ys.is_empty() {
            return Self::identity();
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        OutputMap { mean, scale }
    }
}

/// Feed-forward network `[d, l, ..., l, 1]` with `tanh(t / theta)` hidden
/// activations. Weight matrices are stored row-major, one row per output
/// unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub(crate) sizes: Vec<usize>,
    pub(crate) theta: f64,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) input_map: InputMap,
    pub(crate) output_map: OutputMap,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.fill(0.0);
        }
    }

    /// Flattened in the order of [`Mlp::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Per-layer activation buffers reused across forward passes.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// First-layer weights are drawn log-uniformly in `[1, FIRST_LAYER_STEEPNESS]`
/// (over `sqrt(fan_in)`).
const FIRST_LAYER_STEEPNESS: f64 = 30.0;

impl Mlp {
    /// `d` inputs, `h` hidden layers of width `l`, one output. Weights are
    /// `|U(-1, 1)| / sqrt(fan_in)`, biases zero, maps identity.
    pub fn init(d: usize, h: usize, l: usize, theta: f64, seed: u64) -> Result<Self> {
        if d == 0 || h == 0 || l == 0 {
            return Err(Error::InvalidParameter("network sizes must be at least 1".into()));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        let mut sizes = vec![d];
        sizes.extend(std::iter::repeat_n(l, h));
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<Vec<f64>> = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let scale = 1.0 / (w[0] as f64).sqrt();
                if k == 0 {
                    // log-uniform steepness so some units can resolve sharp steps
                    (0..w[0] * w[1]).map(|_| FIRST_LAYER_STEEPNESS.powf(rng.gen_range(0.0f64..1.0)) * scale).collect()
                } else {
                    (0..w[0] * w[1]).map(|_| rng.gen_range(-1.0f64..1.0).abs() * scale).collect()
                }
            })
            .collect();
        let mut biases: Vec<Vec<f64>> = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        // spread the first-layer transitions over the normalised input cube
        for (j, b) in biases[0].iter_mut().enumerate() {
            let row = &weights[0][j * d..(j + 1) * d];
            let c = rng.gen_range(-1.0f64..1.0);
            *b = -c * row.iter().sum::<f64>();
        }
        Ok(Mlp {
            sizes,
            theta,
            weights,
            biases,
            input_map: InputMap::identity(d),
            output_map: OutputMap::identity(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn depth(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn width(&self) -> usize {
        self.sizes[1]
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_map(&self) -> &InputMap {
        &self.input_map
    }

    pub fn output_map(&self) -> OutputMap {
        self.output_map
    }

    pub fn set_maps(&mut self, input: InputMap, output: OutputMap) -> Result<()> {
        input.validate(self.input_dim())?;
        if !(output.mean.is_finite() && output.scale.is_finite() && output.scale > 0.0) {
            return Err(Error::InvalidModel("output map needs a finite mean and positive scale".into()));
        }
        self.input_map = input;
        self.output_map = output;
        Ok(())
    }

    /// Weights plus biases of the layers (the affine maps excluded).
    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Floats a deployed model stores: parameters, `theta`, and the maps.
    pub fn stored_float_count(&self) -> usize {
        self.param_count() + 1 + 2 * self.input_dim() + 2
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_dim(self.param_count(), flat.len())?;
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// Network output in target units.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.forward_with(x, &mut Scratch::default()))
    }

    /// Forward pass reusing `scratch`; `x` must have the input dimension.
    pub fn forward_with(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let raw = self.forward_raw(x, scratch);
        self.output_map.mean + self.output_map.scale * raw
    }

    fn forward_raw(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let layers = self.weights.len();
        scratch.acts.resize_with(layers + 1, Vec::new);
        let a0 = &mut scratch.acts[0];
        a0.clear();
        a0.extend(
            x.iter()
                .zip(&self.input_map.center)
                .zip(&self.input_map.half_width)
                .map(|((v, c), h)| (v - c) / h),
        );
        for j in 0..layers {
            let (n_in, n_out) = (self.sizes[j], self.sizes[j + 1]);
            let (head, tail) = scratch.acts.split_at_mut(j + 1);
            let input = &head[j];
            let out = &mut tail[0];
            out.clear();
            let last = j + 1 == layers;
            for (row, bias) in self.weights[j].chunks_exact(n_in).zip(&self.biases[j]).take(n_out) {
                let s = dot(row, input) + bias;
                out.push(if last { s } else { (s / self.theta).tanh() });
            }
        }
        scratch.acts[layers][0]
    }

    /// Adds `dl_dy * d(output)/d(params)` to `grads`, where `dl_dy` is the
    /// derivative of the loss with respect to the output in target units.
    /// Uses the activations left in `scratch` by the last forward pass.
    pub(crate) fn backward(&self, dl_dy: f64, scratch: &mut Scratch, grads: &mut Gradients) {
        let layers = self.weights.len();
        let Scratch { acts, delta, delta_next } = scratch;
        delta.clear();
        delta.push(dl_dy * self.output_map.scale);
        for j in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[j], self.sizes[j + 1]);
            if j + 1 < layers {
                // delta holds dL/da for this layer's outputs; turn it into dL/ds
                for (dv, a) in delta.iter_mut().zip(&acts[j + 1]) {
                    *dv *= (1.0 - a * a) / self.theta;
                }
            }
            let input = &acts[j];
            let gw = &mut grads.weights[j];
            for (o, &dv) in delta.iter().enumerate().take(n_out) {
                grads.biases[j][o] += dv;
                if dv != 0.0 {
                    for (g, a) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += dv * a;
                    }
                }
            }
            if j > 0 {
                delta_next.clear();
                delta_next.resize(n_in, 0.0);
                for (o, &dv) in delta.iter().enumerate().take(n_out) {
                    if dv != 0.0 {
                        let row = &self.weights[j][o * n_in..(o + 1) * n_in];
                        for (dn, w) in delta_next.iter_mut().zip(row) {
                            *dn += dv * w;
                        }
                    }
                }
                std::mem::swap(delta, delta_next);
            }
        }
    }

    /// Sets every negative weight to zero; biases are left free.
    pub fn project_nonneg(&mut self) {
        for w in self.weights.iter_mut().flatten() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
    }

    pub fn has_nonneg_weights(&self) -> bool {
        self.weights.iter().flatten().all(|w| *w >= 0.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.sizes.len() < 3 || self.sizes.contains(&0) || *self.sizes.last().unwrap() != 1 {
            return Err(Error::InvalidModel(format!("bad layer sizes {:?}", self.sizes)));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidModel(format!("bad theta {}", self.theta)));
        }
        check_dim(self.sizes.len() - 1, self.weights.len())?;
        check_dim(self.sizes.len() - 1, self.biases.len())?;
        for (j, w) in self.sizes.windows(2).enumerate() {
            check_dim(w[0] * w[1], self.weights[j].len())?;
            check_dim(w[1], self.biases[j].len())?;
        }
        if self.weights.iter().chain(&self.biases).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        self.input_map.validate(self.input_dim())?;
        let om = self.output_map;
        if !(om.mean.is_finite() && om.scale.is_finite() && om.scale > 0.0) {
            return Err(Error::InvalidModel("bad output map".into()));
        }
        Ok(())
    }
}

/// An [`Mlp`] whose weights are all non-negative, hence a non-decreasing
/// function of its input.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneMlp(Mlp);

impl MonotoneMlp {
    pub fn init(d: usize, h: usize, l: usize, theta: f64, seed: u64) -> Result<Self> {
        Ok(MonotoneMlp(Mlp::init(d, h, l, theta, seed)?))
    }

    /// Fails if any weight is negative.
    pub fn try_from_mlp(net: Mlp) -> Result<Self> {
        if !net.has_nonneg_weights() {
            return Err(Error::InvalidModel("monotone network has a negative weight".into()));
        }
        Ok(MonotoneMlp(net))
    }

    /// Projects onto non-negative weights.
    pub fn from_mlp_projected(mut net: Mlp) -> Self {
        net.project_nonneg();
        MonotoneMlp(net)
    }

    pub fn as_mlp(&self) -> &Mlp {
        &self.0
    }

    pub fn into_mlp(self) -> Mlp {
        self.0
    }

    pub fn set_maps(&mut self, input: InputMap, output: OutputMap) -> Result<()> {
        self.0.set_maps(input, output)
    }

    /// Adds `delta` to the output bias (in raw units); keeps monotonicity.
    pub fn shift_output_bias(&mut self, delta: f64) {
        if let Some(b) = self.0.biases.last_mut() {
            b[0] += delta;
        }
    }
}

impl Deref for MonotoneMlp {
    type Target = Mlp;

    fn deref(&self) -> &Mlp {
        &self.0
    }
}

/// Float count quoted for the reference architecture (four 64-wide layers):
/// `64 d + 4 * 64^2 + 5 * 64`.
pub fn reference_float_count(d: usize) -> usize {
    64 * d + 4 * 64 * 64 + 5 * 64
}
