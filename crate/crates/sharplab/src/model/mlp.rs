use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Objective, ParamVector, Sample};
use crate::error::{Error, Result};

/// Hidden-layer activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation. relu'(0) = 0.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(format!(
                "unknown activation `{other}` (expected relu, tanh or identity)"
            )),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        };
        f.write_str(s)
    }
}

/// Architecture description; the parameter count d is derivable from it alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input_dim: usize,
    /// (width, activation) per hidden layer; may be empty for a linear model.
    pub hidden_layers: Vec<(usize, Activation)>,
    pub num_classes: usize,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Domain("model input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Domain("model needs at least 2 classes".into()));
        }
        if self.hidden_layers.iter().any(|&(w, _)| w == 0) {
            return Err(Error::Domain("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Total parameter count: Σ (in·out + out) over all layers.
    pub fn param_count(&self) -> usize {
        let mut d = 0;
        let mut fan_in = self.input_dim;
        for &(width, _) in &self.hidden_layers {
            d += fan_in * width + width;
            fan_in = width;
        }
        d + fan_in * self.num_classes + self.num_classes
    }
}

/// Loss hyper-parameters. `weight_decay` is applied by the optimizer on the
/// outer update, never inside the loss; it lives here so run records carry it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub label_smoothing: f64,
    pub weight_decay: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            label_smoothing: 0.0,
            weight_decay: 0.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Domain(format!(
                "label_smoothing must be in [0, 1), got {}",
                self.label_smoothing
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Domain("weight_decay must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    in_dim: usize,
    out_dim: usize,
    act: Activation,
}

/// Dense feed-forward classifier over a flat parameter vector.
///
/// Parameters are laid out layer by layer: the weight matrix row-major
/// (out_dim × in_dim), then the bias vector. The loss is mean softmax
/// cross-entropy against smoothed one-hot targets, computed in
/// log-sum-exp form with max subtraction.
pub struct Mlp {
    layers: Vec<LayerShape>,
    input_dim: usize,
    num_classes: usize,
    param_count: usize,
    init_seed: u64,
    loss_cfg: LossConfig,
    grad_evals: AtomicU64,
}

impl Mlp {
    pub fn new(spec: &ModelSpec, loss_cfg: LossConfig) -> Result<Self> {
        spec.validate()?;
        loss_cfg.validate()?;
        let mut layers = Vec::with_capacity(spec.hidden_layers.len() + 1);
        let mut fan_in = spec.input_dim;
        for &(width, act) in &spec.hidden_layers {
            layers.push(LayerShape {
                in_dim: fan_in,
                out_dim: width,
                act,
            });
            fan_in = width;
        }
        layers.push(LayerShape {
            in_dim: fan_in,
            out_dim: spec.num_classes,
            act: Activation::Identity,
        });
        Ok(Self {
            layers,
            input_dim: spec.input_dim,
            num_classes: spec.num_classes,
            param_count: spec.param_count(),
            init_seed: spec.init_seed,
            loss_cfg,
            grad_evals: AtomicU64::new(0),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn loss_config(&self) -> &LossConfig {
        &self.loss_cfg
    }

    /// Number of gradient evaluations performed since construction or the
    /// last [`Mlp::reset_grad_evals`]. Instrumentation only; does not affect
    /// any numeric result.
    pub fn grad_eval_count(&self) -> u64 {
        self.grad_evals.load(Ordering::Relaxed)
    }

    pub fn reset_grad_evals(&self) {
        self.grad_evals.store(0, Ordering::Relaxed);
    }

    /// Deterministic initialization: weights uniform in ±sqrt(6/(fan_in+fan_out))
    /// drawn from a ChaCha8 stream seeded with `init_seed`, biases zero.
    pub fn init_params(&self) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        let mut values = Vec::with_capacity(self.param_count);
        for layer in &self.layers {
            let bound = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            for _ in 0..layer.in_dim * layer.out_dim {
                let u: f64 = rng.gen();
                values.push((2.0 * u - 1.0) * bound);
            }
            values.extend(std::iter::repeat(0.0).take(layer.out_dim));
        }
        ParamVector::from_vec(values)
    }

    fn check_batch(&self, w: &ParamVector, batch: &[Sample]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        w.check_dim(self.param_count)?;
        for s in batch {
            if s.features.len() != self.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim,
                    got: s.features.len(),
                });
            }
            if s.label >= self.num_classes {
                return Err(Error::Domain(format!(
                    "label {} out of range for {} classes",
                    s.label, self.num_classes
                )));
            }
        }
        Ok(())
    }

    /// Raw class scores for one feature vector.
    pub fn logits(&self, w: &ParamVector, features: &[f64]) -> Vec<f64> {
        let p = w.as_slice();
        let mut offset = 0;
        let mut activations: Vec<f64> = features.to_vec();
        for layer in &self.layers {
            let mut out = vec![0.0; layer.out_dim];
            for (r, o) in out.iter_mut().enumerate() {
                let row = &p[offset + r * layer.in_dim..offset + (r + 1) * layer.in_dim];
                let mut z = p[offset + layer.in_dim * layer.out_dim + r];
                for (wv, a) in row.iter().zip(&activations) {
                    z += wv * a;
                }
                *o = layer.act.apply(z);
            }
            offset += layer.in_dim * layer.out_dim + layer.out_dim;
            activations = out;
        }
        activations
    }

    /// Predicted class (argmax of logits, lowest index on ties).
    pub fn predict(&self, w: &ParamVector, features: &[f64]) -> usize {
        let logits = self.logits(w, features);
        let mut best = 0;
        for (i, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = i;
            }
        }
        best
    }

    /// Smoothed target weight for class `c` given the true label.
    fn target(&self, label: usize, c: usize) -> f64 {
        let s = self.loss_cfg.label_smoothing;
        if c == label {
            1.0 - s
        } else {
            s / (self.num_classes - 1) as f64
        }
    }

    /// Cross-entropy of one logit vector against the smoothed target:
    /// lse(z) − Σ_c t_c z_c, with lse computed after max subtraction.
    fn sample_loss_from_logits(&self, logits: &[f64], label: usize) -> f64 {
        let z_max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logits.iter().map(|z| (z - z_max).exp()).sum();
        let lse = z_max + sum_exp.ln();
        let weighted: f64 = logits
            .iter()
            .enumerate()
            .map(|(c, z)| self.target(label, c) * z)
            .sum();
        lse - weighted
    }
}

impl Objective for Mlp {
    fn dim(&self) -> usize {
        self.param_count
    }

    fn loss(&self, w: &ParamVector, batch: &[Sample]) -> Result<f64> {
        self.check_batch(w, batch)?;
        let mut total = 0.0;
        for s in batch {
            let logits = self.logits(w, &s.features);
            total += self.sample_loss_from_logits(&logits, s.label);
        }
        Ok(total / batch.len() as f64)
    }

    fn grad(&self, w: &ParamVector, batch: &[Sample]) -> Result<ParamVector> {
        self.check_batch(w, batch)?;
        self.grad_evals.fetch_add(1, Ordering::Relaxed);

        let p = w.as_slice();
        let mut g = vec![0.0; self.param_count];
        let inv_n = 1.0 / batch.len() as f64;

        // Per-layer parameter offsets.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for layer in &self.layers {
            offsets.push(off);
            off += layer.in_dim * layer.out_dim + layer.out_dim;
        }

        for s in batch {
            // Forward pass, keeping inputs and pre-activations per layer.
            let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            let mut pre_acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
            let mut a: Vec<f64> = s.features.clone();
            for (layer, &loff) in self.layers.iter().zip(&offsets) {
                let mut z = vec![0.0; layer.out_dim];
                for (r, zr) in z.iter_mut().enumerate() {
                    let row = &p[loff + r * layer.in_dim..loff + (r + 1) * layer.in_dim];
                    let mut acc = p[loff + layer.in_dim * layer.out_dim + r];
                    for (wv, av) in row.iter().zip(&a) {
                        acc += wv * av;
                    }
                    *zr = acc;
                }
                let next: Vec<f64> = z.iter().map(|&zv| layer.act.apply(zv)).collect();
                inputs.push(a);
                pre_acts.push(z);
                a = next;
            }

            // Softmax probabilities from the output logits.
            let logits = &a;
            let z_max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|z| (z - z_max).exp()).collect();
            let sum_exp: f64 = exps.iter().sum();

            // dL/dz at the output: (softmax − target) / n.
            let mut delta: Vec<f64> = exps
                .iter()
                .enumerate()
                .map(|(c, e)| (e / sum_exp - self.target(s.label, c)) * inv_n)
                .collect();

            // Backward pass.
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let loff = offsets[l];
                let input = &inputs[l];
                for (r, &d) in delta.iter().enumerate() {
                    let g_row = &mut g[loff + r * layer.in_dim..loff + (r + 1) * layer.in_dim];
                    for (gw, &av) in g_row.iter_mut().zip(input) {
                        *gw += d * av;
                    }
                    g[loff + layer.in_dim * layer.out_dim + r] += d;
                }
                if l > 0 {
                    let prev = &self.layers[l - 1];
                    let mut next_delta = vec![0.0; layer.in_dim];
                    for (r, &d) in delta.iter().enumerate() {
                        let row = &p[loff + r * layer.in_dim..loff + (r + 1) * layer.in_dim];
                        for (nd, wv) in next_delta.iter_mut().zip(row) {
                            *nd += wv * d;
                        }
                    }
                    for (nd, &z) in next_delta.iter_mut().zip(&pre_acts[l - 1]) {
                        *nd *= prev.act.derivative(z);
                    }
                    delta = next_delta;
                }
            }
        }
        Ok(ParamVector::from_vec(g))
    }
}
