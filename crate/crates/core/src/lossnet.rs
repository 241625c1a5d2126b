//! The parametric loss network.
//!
//! A fixed small MLP maps the concatenated input `[p, e_y]` (predicted
//! probabilities plus one-hot label, length `2C`) through hidden widths
//! 10-20-20 to a single output, with Softplus activations throughout.
//! The Softplus head guarantees a non-negative loss value.
//!
//! Parameters live in one flat vector with a fixed, documented order:
//! layer by layer, weights first (row-major, one row per output unit),
//! then the bias. The evolutionary search mutates this vector directly;
//! checkpoints serialize it losslessly.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::probspace::ProbLabelPair;
use crate::{Error, Result};

/// Hidden layer widths between the `2C` input and the scalar output.
pub const HIDDEN_DIMS: [usize; 3] = [10, 20, 20];

/// Checkpoint format version written by [`LossNetParams::save`].
pub const CHECKPOINT_VERSION: u32 = 1;

/// Default weight-initialization scale; weights are drawn with standard
/// deviation `scale / sqrt(fan_in)`.
pub const DEFAULT_INIT_SCALE: f64 = 1.0;

const ACTIVATION_NAME: &str = "softplus";

/// Overflow-safe Softplus: `max(x, 0) + ln(1 + exp(-|x|))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Layer widths for a given class count: `[2C, 10, 20, 20, 1]`.
pub fn layer_dims(class_count: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(HIDDEN_DIMS.len() + 2);
    dims.push(2 * class_count);
    dims.extend_from_slice(&HIDDEN_DIMS);
    dims.push(1);
    dims
}

/// Total parameter count for the given layer widths.
pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// The full parameter state of one loss network.
#[derive(Debug, Clone, PartialEq)]
pub struct LossNetParams {
    class_count: usize,
    layer_dims: Vec<usize>,
    flat: Vec<f64>,
}

/// Gradients of a scalar loss-network output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    /// Gradient with respect to the flat parameter vector.
    pub d_params: Vec<f64>,
    /// Gradient with respect to the concatenated input `[p, e_y]`.
    pub d_input: Vec<f64>,
}

impl LossGradients {
    pub fn zeros_like(params: &LossNetParams) -> Self {
        Self {
            d_params: vec![0.0; params.flat.len()],
            d_input: vec![0.0; params.layer_dims[0]],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.d_params.iter_mut().for_each(|v| *v *= s);
        self.d_input.iter_mut().for_each(|v| *v *= s);
    }
}

/// Reusable buffers for forward/backward passes. One workspace serves one
/// network architecture; evaluation loops reuse it to avoid per-call
/// allocation.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    input: Vec<f64>,
    pre_acts: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, dims: &[usize]) {
        let layers = dims.len() - 1;
        self.input.resize(dims[0], 0.0);
        if self.pre_acts.len() != layers {
            self.pre_acts = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
            self.acts = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        }
        let widest = *dims.iter().max().unwrap();
        self.delta.resize(widest, 0.0);
        self.delta_prev.resize(widest, 0.0);
    }
}

impl LossNetParams {
    /// Random initialization: zero-mean Gaussian weights with standard
    /// deviation `scale / sqrt(fan_in)`, zero biases. Weights are drawn in
    /// flat order, so a seeded stream reproduces the same network.
    pub fn init<R: Rng + ?Sized>(class_count: usize, rng: &mut R, scale: f64) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class_count = {class_count} must be at least 2"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "init scale = {scale} must be positive"
            )));
        }
        let dims = layer_dims(class_count);
        let mut flat = Vec::with_capacity(param_count(&dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = scale / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let e: f64 = rng.sample(StandardNormal);
                flat.push(std * e);
            }
            flat.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(Self {
            class_count,
            layer_dims: dims,
            flat,
        })
    }

    /// The all-zero network; computes `softplus(0) = ln 2` for every input.
    pub fn zeros(class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class_count = {class_count} must be at least 2"
            )));
        }
        let dims = layer_dims(class_count);
        let n = param_count(&dims);
        Ok(Self {
            class_count,
            layer_dims: dims,
            flat: vec![0.0; n],
        })
    }

    /// Rebuild a network from a flat vector laid out in the canonical order
    /// for the standard architecture.
    pub fn from_flat(class_count: usize, flat: Vec<f64>) -> Result<Self> {
        Self::from_parts(class_count, layer_dims(class_count), flat)
    }

    fn from_parts(class_count: usize, dims: Vec<usize>, flat: Vec<f64>) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class_count = {class_count} must be at least 2"
            )));
        }
        if dims.len() < 2 {
            return Err(Error::Checkpoint {
                field: "layer_dims".into(),
                reason: format!("need at least 2 entries, got {}", dims.len()),
            });
        }
        if dims[0] != 2 * class_count {
            return Err(Error::Checkpoint {
                field: "layer_dims".into(),
                reason: format!(
                    "input width {} does not equal 2 * class_count = {}",
                    dims[0],
                    2 * class_count
                ),
            });
        }
        if *dims.last().unwrap() != 1 {
            return Err(Error::Checkpoint {
                field: "layer_dims".into(),
                reason: format!("output width {} must be 1", dims.last().unwrap()),
            });
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Checkpoint {
                field: "layer_dims".into(),
                reason: "zero-width layer".into(),
            });
        }
        let expect = param_count(&dims);
        if flat.len() != expect {
            return Err(Error::Checkpoint {
                field: "flat".into(),
                reason: format!(
                    "length {} does not match layer dims (expected {expect})",
                    flat.len()
                ),
            });
        }
        Ok(Self {
            class_count,
            layer_dims: dims,
            flat,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layer_count(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.flat.len()
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    /// Weight and bias slices of layer `l` (weights row-major,
    /// `dims[l+1] x dims[l]`).
    pub fn layer_slices(&self, l: usize) -> (&[f64], &[f64]) {
        let (offset, fan_in, fan_out) = self.layer_offset(l);
        let w_end = offset + fan_in * fan_out;
        (&self.flat[offset..w_end], &self.flat[w_end..w_end + fan_out])
    }

    fn layer_offset(&self, l: usize) -> (usize, usize, usize) {
        assert!(l < self.layer_count(), "layer index out of range");
        let mut offset = 0;
        for k in 0..l {
            offset += self.layer_dims[k] * self.layer_dims[k + 1] + self.layer_dims[k + 1];
        }
        (offset, self.layer_dims[l], self.layer_dims[l + 1])
    }

    pub fn workspace(&self) -> Workspace {
        let mut ws = Workspace::default();
        ws.ensure(&self.layer_dims);
        ws
    }

    fn check_pair(&self, pair: &ProbLabelPair) -> Result<()> {
        if pair.class_count() != self.class_count {
            return Err(Error::ClassMismatch {
                expected: self.class_count,
                got: pair.class_count(),
            });
        }
        Ok(())
    }

    fn fill_input(&self, pair: &ProbLabelPair, input: &mut [f64]) {
        let c = self.class_count;
        input[..c].copy_from_slice(pair.probs());
        input[c..].fill(0.0);
        input[c + pair.label()] = 1.0;
    }

    /// Evaluate the loss for one sample.
    pub fn forward(&self, pair: &ProbLabelPair) -> Result<f64> {
        let mut ws = self.workspace();
        self.forward_with(pair, &mut ws)
    }

    /// Evaluate the loss using caller-owned buffers.
    pub fn forward_with(&self, pair: &ProbLabelPair, ws: &mut Workspace) -> Result<f64> {
        self.check_pair(pair)?;
        ws.ensure(&self.layer_dims);
        self.fill_input(pair, &mut ws.input);
        Ok(self.run_forward(ws))
    }

    /// Evaluate the loss on a raw concatenated input of length `2C`.
    /// The vector is not required to lie on the simplex; this is the
    /// entry point for finite-difference probes of the input gradient.
    pub fn forward_input(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.layer_dims[0] {
            return Err(Error::InvalidArgument(format!(
                "input length {} does not match network input width {}",
                input.len(),
                self.layer_dims[0]
            )));
        }
        let mut ws = self.workspace();
        ws.input.copy_from_slice(input);
        Ok(self.run_forward(&mut ws))
    }

    fn run_forward(&self, ws: &mut Workspace) -> f64 {
        let mut offset = 0;
        for l in 0..self.layer_count() {
            let fan_in = self.layer_dims[l];
            let fan_out = self.layer_dims[l + 1];
            let weights = &self.flat[offset..offset + fan_in * fan_out];
            let bias = &self.flat[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            // Split borrows: the previous activation is read-only here.
            let (prev_slice, pre, act) = if l == 0 {
                (
                    ws.input.as_slice(),
                    &mut ws.pre_acts[0],
                    &mut ws.acts[0],
                )
            } else {
                let (lo, hi) = ws.acts.split_at_mut(l);
                (lo[l - 1].as_slice(), &mut ws.pre_acts[l], &mut hi[0])
            };
            for i in 0..fan_out {
                let row = &weights[i * fan_in..(i + 1) * fan_in];
                let mut z = bias[i];
                for (w, x) in row.iter().zip(prev_slice.iter()) {
                    z += w * x;
                }
                pre[i] = z;
                act[i] = softplus(z);
            }
            offset += fan_in * fan_out + fan_out;
        }
        ws.acts[self.layer_count() - 1][0]
    }

    /// Exact reverse-mode gradients of `upstream * forward(self, pair)`.
    pub fn backward(&self, pair: &ProbLabelPair, upstream: f64) -> Result<LossGradients> {
        let mut ws = self.workspace();
        let mut grads = LossGradients::zeros_like(self);
        self.backward_acc(pair, upstream, &mut ws, &mut grads)?;
        Ok(grads)
    }

    /// Reverse-mode pass that adds gradients into `grads`; used by batch
    /// loops that average over many samples.
    pub fn backward_acc(
        &self,
        pair: &ProbLabelPair,
        upstream: f64,
        ws: &mut Workspace,
        grads: &mut LossGradients,
    ) -> Result<()> {
        self.check_pair(pair)?;
        if grads.d_params.len() != self.flat.len() || grads.d_input.len() != self.layer_dims[0] {
            return Err(Error::InvalidArgument(
                "gradient buffer shape does not match the network".into(),
            ));
        }
        ws.ensure(&self.layer_dims);
        self.fill_input(pair, &mut ws.input);
        self.run_forward(ws);

        let layers = self.layer_count();
        // Output delta through the Softplus head.
        ws.delta[0] = upstream * sigmoid(ws.pre_acts[layers - 1][0]);

        for l in (0..layers).rev() {
            let (offset, fan_in, fan_out) = self.layer_offset(l);
            let weights = &self.flat[offset..offset + fan_in * fan_out];
            let prev_act: &[f64] = if l == 0 { &ws.input } else { &ws.acts[l - 1] };

            let dw = &mut grads.d_params[offset..offset + fan_in * fan_out];
            for i in 0..fan_out {
                let d = ws.delta[i];
                if d != 0.0 {
                    let row = &mut dw[i * fan_in..(i + 1) * fan_in];
                    for (g, x) in row.iter_mut().zip(prev_act.iter()) {
                        *g += d * x;
                    }
                }
            }
            let db =
                &mut grads.d_params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            for i in 0..fan_out {
                db[i] += ws.delta[i];
            }

            // Propagate to the previous layer.
            for j in 0..fan_in {
                let mut s = 0.0;
                for i in 0..fan_out {
                    s += weights[i * fan_in + j] * ws.delta[i];
                }
                ws.delta_prev[j] = s;
            }
            if l == 0 {
                for j in 0..fan_in {
                    grads.d_input[j] += ws.delta_prev[j];
                }
            } else {
                for j in 0..fan_in {
                    ws.delta[j] = ws.delta_prev[j] * sigmoid(ws.pre_acts[l - 1][j]);
                }
            }
        }
        Ok(())
    }

    /// Write a checkpoint. Doubles are serialized as 17-significant-digit
    /// decimal strings, which round-trip bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format_version: CHECKPOINT_VERSION,
            class_count: self.class_count,
            layer_dims: self.layer_dims.clone(),
            activation: ACTIVATION_NAME.to_string(),
            flat: self.flat.iter().map(|v| format!("{v:.16e}")).collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Load a checkpoint, validating version, activation, and shapes.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)?;
        if file.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: file.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if file.activation != ACTIVATION_NAME {
            return Err(Error::Checkpoint {
                field: "activation".into(),
                reason: format!(
                    "unsupported activation `{}` (expected `{ACTIVATION_NAME}`)",
                    file.activation
                ),
            });
        }
        let mut flat = Vec::with_capacity(file.flat.len());
        for (i, s) in file.flat.iter().enumerate() {
            let v: f64 = s.parse().map_err(|_| Error::Checkpoint {
                field: format!("flat[{i}]"),
                reason: format!("`{s}` is not a decimal double"),
            })?;
            if !v.is_finite() {
                return Err(Error::Checkpoint {
                    field: format!("flat[{i}]"),
                    reason: "not finite".into(),
                });
            }
            flat.push(v);
        }
        Self::from_parts(file.class_count, file.layer_dims, flat)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    class_count: usize,
    layer_dims: Vec<usize>,
    activation: String,
    flat: Vec<String>,
}
