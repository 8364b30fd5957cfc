//! Fully-connected softmax classifier with per-example gradients.
//!
//! The canonical flat parameter order is: layers in forward order, and within
//! each layer the `out × in` weight matrix row-major followed by the bias.
//! Clipping and noising act on this flat vector.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and post-activation `a`.
    /// The ReLU subgradient at 0 is 0.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Input dimension, hidden widths, class count.
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub loss: LossKind,
}

impl MlpConfig {
    /// `[input, 128, 64, classes]` with ReLU.
    pub fn desk_default(input_dim: usize, classes: usize) -> Self {
        Self {
            layer_sizes: vec![input_dim, 128, 64, classes],
            activation: Activation::Relu,
            loss: LossKind::SoftmaxCrossEntropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(
                "layer_sizes needs at least an input and an output size".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().expect("validated config")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Total flat parameter dimension `Σ (out·in + out)`.
    pub fn param_dim(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }
}

/// Identifies a weight layer, displayed 1-based as `fc1`, `fc2`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerRef(pub usize);

impl fmt::Display for LayerRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fc{}", self.0 + 1)
    }
}

impl FromStr for LayerRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix("fc")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .map(|n| LayerRef(n - 1))
            .ok_or_else(|| Error::UnknownLayer(s.to_string()))
    }
}

impl Serialize for LayerRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LayerRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The set of layers the spectral probe reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbeSpec {
    pub layers: Vec<LayerRef>,
}

impl ProbeSpec {
    pub fn single(layer: LayerRef) -> Self {
        Self {
            layers: vec![layer],
        }
    }

    pub fn validate(&self, cfg: &MlpConfig) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("probe layer set is empty".into()));
        }
        for l in &self.layers {
            if l.0 >= cfg.num_layers() {
                return Err(Error::UnknownLayer(l.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    fn len(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    config: MlpConfig,
    layers: Vec<DenseLayer>,
}

/// Inputs and labels of a (possibly empty) set of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                actual: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Self {
            dim,
            features,
            labels,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// The examples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Batch {
            dim: self.dim,
            features,
            labels,
        }
    }

    pub fn max_label(&self) -> Option<usize> {
        self.labels.iter().copied().max()
    }
}

/// `|L| × d` matrix of per-example gradients in canonical flat order.
/// Zero rows is legal.
#[derive(Debug, Clone, PartialEq)]
pub struct PerExampleGrads {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PerExampleGrads {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                actual: data.len(),
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-dimensional gradient has no rows to show
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Nominal standard deviation of the initializer for a layer with `fan_in`
/// inputs: uniform on `±sqrt(6/fan_in)` for ReLU (He), `±sqrt(3/fan_in)` for
/// tanh (LeCun). A uniform on `±b` has standard deviation `b/sqrt(3)`.
pub fn init_std(activation: Activation, fan_in: usize) -> f64 {
    init_bound(activation, fan_in) / 3f64.sqrt()
}

fn init_bound(activation: Activation, fan_in: usize) -> f64 {
    let gain = match activation {
        Activation::Relu => 6.0,
        Activation::Tanh => 3.0,
    };
    (gain / fan_in as f64).sqrt()
}

/// Fan-in scaled uniform weights, zero biases. Weights are drawn layer by
/// layer in canonical flat order.
pub fn init_params(cfg: &MlpConfig, rng: &mut RngStream) -> Result<MlpParams> {
    cfg.validate()?;
    let layers = cfg
        .layer_sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = init_bound(cfg.activation, fan_in);
            let data = (0..fan_in * fan_out)
                .map(|_| (2.0 * rng.uniform() - 1.0) * bound)
                .collect();
            Ok(DenseLayer {
                weights: Matrix::new(fan_out, fan_in, data)?,
                bias: vec![0.0; fan_out],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MlpParams {
        config: cfg.clone(),
        layers,
    })
}

impl MlpParams {
    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn dim(&self) -> usize {
        self.layers.iter().map(DenseLayer::len).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn unflatten(cfg: &MlpConfig, flat: &[f64]) -> Result<MlpParams> {
        cfg.validate()?;
        if flat.len() != cfg.param_dim() {
            return Err(Error::DimensionMismatch {
                expected: cfg.param_dim(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        let layers = cfg
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let nw = fan_in * fan_out;
                let weights = Matrix::new(fan_out, fan_in, flat[offset..offset + nw].to_vec())?;
                let bias = flat[offset + nw..offset + nw + fan_out].to_vec();
                offset += nw + fan_out;
                Ok(DenseLayer { weights, bias })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MlpParams {
            config: cfg.clone(),
            layers,
        })
    }

    /// `flat(p') = flat(p) − lr · direction`.
    pub fn apply_update(&self, direction: &[f64], lr: f64) -> Result<MlpParams> {
        let mut next = self.clone();
        next.apply_update_mut(direction, lr)?;
        Ok(next)
    }

    pub fn apply_update_mut(&mut self, direction: &[f64], lr: f64) -> Result<()> {
        if direction.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: direction.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.as_mut_slice();
            for (p, d) in w.iter_mut().zip(&direction[offset..]) {
                *p -= lr * d;
            }
            offset += w.len();
            for (p, d) in layer.bias.iter_mut().zip(&direction[offset..]) {
                *p -= lr * d;
            }
            offset += layer.bias.len();
        }
        Ok(())
    }

    /// Weight matrix of `layer` as the probe sees it (`out × in`).
    pub fn probe_matrix(&self, layer: LayerRef) -> Result<Matrix> {
        self.layers
            .get(layer.0)
            .map(|l| l.weights.clone())
            .ok_or_else(|| Error::UnknownLayer(layer.to_string()))
    }

    /// Logits for a single input.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &a);
            if li != last {
                for v in &mut z {
                    *v = self.config.activation.apply(*v);
                }
            }
            a = z;
        }
        a
    }

    fn check_batch(&self, b: &Batch) -> Result<()> {
        if b.dim() != self.config.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim(),
                actual: b.dim(),
            });
        }
        if let Some(m) = b.max_label() {
            if m >= self.config.classes() {
                return Err(Error::invalid(format!(
                    "label {m} out of range for {} classes",
                    self.config.classes()
                )));
            }
        }
        Ok(())
    }

    /// Gradient of one example's loss written into `out` (length `d`);
    /// returns the loss.
    fn example_gradient(&self, x: &[f64], label: usize, out: &mut [f64]) -> f64 {
        let act = self.config.activation;
        let n = self.layers.len();

        // forward, keeping pre-activations and activations
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        post.push(x.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &post[li]);
            let a = if li + 1 < n {
                z.iter().map(|&v| act.apply(v)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
        }

        let (probs, loss) = softmax_xent(&post[n], label);
        let mut delta = probs;
        delta[label] -= 1.0;

        // layer offsets in the flat vector
        let mut offsets = Vec::with_capacity(n);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.len();
        }

        for li in (0..n).rev() {
            let layer = &self.layers[li];
            let (fan_out, fan_in) = (layer.fan_out(), layer.fan_in());
            let input = &post[li];
            let base = offsets[li];
            let (wg, bg) = out[base..base + fan_out * fan_in + fan_out].split_at_mut(fan_out * fan_in);
            for j in 0..fan_out {
                let dj = delta[j];
                for (g, &a) in wg[j * fan_in..(j + 1) * fan_in].iter_mut().zip(input) {
                    *g = dj * a;
                }
                bg[j] = dj;
            }
            if li > 0 {
                let mut prev = vec![0.0; fan_in];
                for (j, &dj) in delta.iter().enumerate() {
                    for (p, &w) in prev.iter_mut().zip(layer.weights.row(j)) {
                        *p += w * dj;
                    }
                }
                for ((p, &z), &a) in prev.iter_mut().zip(&pre[li - 1]).zip(&post[li]) {
                    *p *= act.derivative(z, a);
                }
                delta = prev;
            }
        }
        loss
    }

    /// Per-example gradients and losses, rows in batch order.
    pub fn per_example_grads(&self, b: &Batch) -> Result<(PerExampleGrads, Vec<f64>)> {
        if b.is_empty() {
            return Err(Error::invalid("per-example gradients need a non-empty batch"));
        }
        self.check_batch(b)?;
        let d = self.dim();
        let mut data = vec![0.0; b.len() * d];
        let losses: Vec<f64> = data
            .par_chunks_mut(d)
            .enumerate()
            .map(|(i, row)| self.example_gradient(b.input(i), b.labels()[i], row))
            .collect();
        Ok((PerExampleGrads::new(b.len(), d, data)?, losses))
    }

    /// Gradient of the mean loss over `b`, and the mean loss. Rows are summed
    /// in batch order starting from the first row.
    pub fn full_batch_gradient(&self, b: &Batch) -> Result<(Vec<f64>, f64)> {
        let (grads, losses) = self.per_example_grads(b)?;
        let mut rows = grads.iter_rows();
        let mut sum = rows.next().expect("non-empty batch").to_vec();
        for r in rows {
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
            }
        }
        let n = b.len() as f64;
        for s in &mut sum {
            *s /= n;
        }
        Ok((sum, losses.iter().sum::<f64>() / n))
    }

    /// Argmax accuracy (ties go to the lowest class index) and mean loss.
    pub fn evaluate(&self, test: &Batch) -> Result<Evaluation> {
        if test.is_empty() {
            return Err(Error::invalid("evaluation needs at least one example"));
        }
        self.check_batch(test)?;
        let mut correct = 0usize;
        let mut loss = 0.0;
        for i in 0..test.len() {
            let logits = self.logits(test.input(i));
            if argmax(&logits) == test.labels()[i] {
                correct += 1;
            }
            loss += softmax_xent(&logits, test.labels()[i]).1;
        }
        let n = test.len() as f64;
        Ok(Evaluation {
            accuracy: correct as f64 / n,
            mean_loss: loss / n,
        })
    }
}

fn affine(layer: &DenseLayer, input: &[f64]) -> Vec<f64> {
    (0..layer.fan_out())
        .map(|j| {
            let row = layer.weights.row(j);
            row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>() + layer.bias[j]
        })
        .collect()
}

/// Max-shifted softmax probabilities and the natural-log cross-entropy.
fn softmax_xent(logits: &[f64], label: usize) -> (Vec<f64>, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    (exps.into_iter().map(|e| e / sum).collect(), loss)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// A 4-axis convolution kernel `C_out × C_in × k_h × k_w` (row-major).
/// Only the probe reshape is supported; there is no convolution forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub c_out: usize,
    pub c_in: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f64>,
}

impl ConvKernel {
    pub fn new(c_out: usize, c_in: usize, kh: usize, kw: usize, data: Vec<f64>) -> Result<Self> {
        let expected = c_out * c_in * kh * kw;
        if expected == 0 {
            return Err(Error::invalid("kernel dimensions must be positive"));
        }
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            c_out,
            c_in,
            kh,
            kw,
            data,
        })
    }

    /// `C_out × (C_in·k_h·k_w)`: one row per output filter.
    pub fn to_probe_matrix(&self) -> Result<Matrix> {
        Matrix::new(self.c_out, self.c_in * self.kh * self.kw, self.data.clone())
    }

    /// Refolds a probe matrix back into a kernel of the given shape.
    pub fn from_probe_matrix(m: &Matrix, c_in: usize, kh: usize, kw: usize) -> Result<Self> {
        if m.cols() != c_in * kh * kw {
            return Err(Error::DimensionMismatch {
                expected: c_in * kh * kw,
                actual: m.cols(),
            });
        }
        Self::new(m.rows(), c_in, kh, kw, m.as_slice().to_vec())
    }
}
