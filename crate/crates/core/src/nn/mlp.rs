use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parameters of a fully connected network with sigmoid hidden layers and
/// one linear output.
///
/// All weights and biases live in one flat buffer. For layer `l` (mapping
/// `sizes[l]` inputs to `sizes[l+1]` outputs) the buffer holds the row-major
/// weight matrix `W_l` (`out × in`) followed by the bias `b_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    sizes: Vec<usize>,
    data: Vec<f64>,
}

impl MlpParams {
    /// Zero-initialized network with layer widths `(D, n_1, ..., n_L, 1)`.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Result<Self, NnError> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(NnError::EmptyLayer);
        }
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let len = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Ok(Self {
            sizes,
            data: vec![0.0; len],
        })
    }

    /// Glorot-uniform weights `U(-a, a)`, `a = √(6 / (fan_in + fan_out))`,
    /// and zero biases.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut p = Self::zeros(input_dim, hidden)?;
        for l in 0..p.n_layers() {
            let (fan_in, fan_out) = (p.sizes[l], p.sizes[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in p.weights_mut(l) {
                *w = rng.random_range(-a..a);
            }
        }
        Ok(p)
    }

    /// Same architecture, all zeros (gradient buffers).
    pub fn zeros_like(&self) -> Self {
        Self {
            sizes: self.sizes.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Number of weight layers, `L + 1`.
    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_hidden(&self) -> usize {
        self.sizes.len() - 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn offset(&self, layer: usize) -> usize {
        self.sizes
            .windows(2)
            .take(layer)
            .map(|w| w[1] * w[0] + w[1])
            .sum()
    }

    fn layer_ranges(&self, layer: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = self.offset(layer);
        let (inp, out) = (self.sizes[layer], self.sizes[layer + 1]);
        let w_end = start + inp * out;
        (start..w_end, w_end..w_end + out)
    }

    /// Row-major `out × in` weight matrix of `layer`.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let (w, _) = self.layer_ranges(layer);
        &self.data[w]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let (w, _) = self.layer_ranges(layer);
        &mut self.data[w]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (_, b) = self.layer_ranges(layer);
        &self.data[b]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let (_, b) = self.layer_ranges(layer);
        &mut self.data[b]
    }

    /// First-layer weight row of hidden neuron `i` (or the output row when
    /// the network has no hidden layer).
    pub fn first_layer_row(&self, i: usize) -> &[f64] {
        let d = self.sizes[0];
        &self.weights(0)[i * d..(i + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.sizes[0] {
            return Err(NnError::Shape {
                expected: self.sizes[0],
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass returning the prediction and every layer's activation.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, ForwardCache), NnError> {
        self.check_input(x)?;
        let mut cache = ForwardCache::new(self);
        let y = self.forward_into(x, &mut cache);
        Ok((y, cache))
    }

    /// Prediction only.
    pub fn predict(&self, x: &[f64]) -> Result<f64, NnError> {
        Ok(self.forward(x)?.0)
    }

    /// Forward pass reusing `cache` buffers. `x` must have the input width.
    pub(crate) fn forward_into(&self, x: &[f64], cache: &mut ForwardCache) -> f64 {
        cache.activations[0].copy_from_slice(x);
        let last = self.n_layers() - 1;
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.data[offset..offset + inp * out];
            let b = &self.data[offset + inp * out..offset + inp * out + out];
            offset += inp * out + out;
            let (prev, next) = cache.activations.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut next[0];
            for o in 0..out {
                let row = &w[o * inp..(o + 1) * inp];
                let z = b[o] + dot(row, a_in);
                a_out[o] = if l == last { z } else { sigmoid(z) };
            }
        }
        cache.activations[last + 1][0]
    }

    /// Gradient of `½(ŷ − y)²` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache, y_true: f64) -> Result<MlpParams, NnError> {
        if cache.activations.len() != self.sizes.len() {
            return Err(NnError::Shape {
                expected: self.sizes.len(),
                got: cache.activations.len(),
            });
        }
        let mut grad = self.zeros_like();
        let mut scratch = BackwardScratch::new(self);
        self.accumulate_gradient(cache, y_true, 1.0, &mut grad, &mut scratch);
        Ok(grad)
    }

    /// `grad += scale · ∂/∂θ ½(ŷ − y)²` for the sample held in `cache`.
    pub(crate) fn accumulate_gradient(
        &self,
        cache: &ForwardCache,
        y_true: f64,
        scale: f64,
        grad: &mut MlpParams,
        scratch: &mut BackwardScratch,
    ) {
        let n = self.n_layers();
        let y_hat = cache.activations[n][0];
        scratch.delta[n][0] = scale * (y_hat - y_true);
        let mut offset = self.data.len();
        for l in (0..n).rev() {
            let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= inp * out + out;
            let w = &self.data[offset..offset + inp * out];
            let (gw, gb) = grad.data[offset..offset + inp * out + out].split_at_mut(inp * out);
            let a_in = &cache.activations[l];
            let (lower, upper) = scratch.delta.split_at_mut(l + 1);
            let delta_out = &upper[0];
            for o in 0..out {
                let d = delta_out[o];
                gb[o] += d;
                if d != 0.0 {
                    let row = &mut gw[o * inp..(o + 1) * inp];
                    for (g, a) in row.iter_mut().zip(a_in) {
                        *g += d * a;
                    }
                }
            }
            if l > 0 {
                let delta_in = &mut lower[l];
                delta_in.iter_mut().for_each(|v| *v = 0.0);
                for o in 0..out {
                    let d = delta_out[o];
                    if d != 0.0 {
                        let row = &w[o * inp..(o + 1) * inp];
                        for (di, wi) in delta_in.iter_mut().zip(row) {
                            *di += d * wi;
                        }
                    }
                }
                for (di, a) in delta_in.iter_mut().zip(a_in) {
                    *di *= a * (1.0 - a);
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Activations `v⁰ = x, v¹, ..., v^L, ŷ` from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub(crate) fn new(params: &MlpParams) -> Self {
        Self {
            activations: params.sizes.iter().map(|n| vec![0.0; *n]).collect(),
        }
    }

    pub fn activations(&self) -> &[Vec<f64>] {
        &self.activations
    }

    pub fn output(&self) -> f64 {
        self.activations.last().expect("non-empty network")[0]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BackwardScratch {
    delta: Vec<Vec<f64>>,
}

impl BackwardScratch {
    pub(crate) fn new(params: &MlpParams) -> Self {
        Self {
            delta: params.sizes.iter().map(|n| vec![0.0; *n]).collect(),
        }
    }
}
