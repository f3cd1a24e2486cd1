//! Fully connected networks with explicit reverse-mode gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ToyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// `y = act(W x + b)` with `W` stored row-major, `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs], activation }
    }

    /// Weights and biases drawn from `N(0, std²)`.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, activation: Activation, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let weights = (0..inputs * outputs).map(|_| normal.sample(rng)).collect();
        let bias = (0..outputs).map(|_| normal.sample(rng)).collect();
        Self { inputs, outputs, weights, bias, activation }
    }

    #[inline]
    pub fn pre_activation(&self, x: &[f64], row: usize) -> f64 {
        let w = &self.weights[row * self.inputs..(row + 1) * self.inputs];
        self.bias[row] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs).map(|r| self.activation.apply(self.pre_activation(x, r))).collect()
    }
}

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

/// A chain of dense layers. Every parameter change bumps an internal
/// generation counter so gradients cannot be taken against a stale cache.
#[derive(Debug, PartialEq)]
pub struct TinyNet {
    layers: Vec<Layer>,
    id: u64,
    generation: u64,
}

impl Clone for TinyNet {
    fn clone(&self) -> Self {
        Self { layers: self.layers.clone(), id: NEXT_NET_ID.fetch_add(1, Ordering::Relaxed), generation: 0 }
    }
}

/// Activations recorded by [`TinyNet::forward`]: the network input followed
/// by each layer's output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    net_id: u64,
    generation: u64,
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the input at least")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    /// Output of layer `l` (0-based).
    pub fn layer_output(&self, l: usize) -> &[f64] {
        &self.activations[l + 1]
    }
}

/// Parameter gradients, one `(weights, bias)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &TinyNet) -> Self {
        Self { layers: net.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()])).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(a, c)| *a += c);
            b.iter_mut().zip(ob).for_each(|(a, c)| *a += c);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|(w, b)| w.iter().chain(b).all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl TinyNet {
    pub fn new(layers: Vec<Layer>) -> Result<Self, ToyError> {
        if layers.is_empty() {
            return Err(ToyError::InvalidConfig("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(ToyError::InvalidConfig(format!("layer {i} parameter shapes are inconsistent")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(ToyError::InvalidConfig(format!("layer {i} has non-finite parameters")));
            }
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(ToyError::InvalidConfig(format!(
                    "layer widths do not chain: {} -> {}",
                    w[0].outputs, w[1].inputs
                )));
            }
        }
        Ok(Self { layers, id: NEXT_NET_ID.fetch_add(1, Ordering::Relaxed), generation: 0 })
    }

    /// Random network with layer widths `dims` (input first) and the given
    /// activations; parameters from `N(0, std(fan_in)²)`.
    pub fn random<R: Rng>(dims: &[usize], activations: &[Activation], std: impl Fn(usize) -> f64, rng: &mut R) -> Result<Self, ToyError> {
        if dims.len() != activations.len() + 1 {
            return Err(ToyError::InvalidConfig("need one activation per layer".into()));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, a)| Layer::random(d[0], d[1], *a, std(d[0]), rng))
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Mutable access to the parameters; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache, ToyError> {
        if input.len() != self.input_dim() {
            return Err(ToyError::DimMismatch { expected: self.input_dim(), got: input.len() });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap());
            activations.push(next);
        }
        Ok(ForwardCache { net_id: self.id, generation: self.generation, activations })
    }

    /// Reverse pass: given `dL/d(output)`, returns parameter gradients and
    /// `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &[f64]) -> Result<(Gradients, Vec<f64>), ToyError> {
        if cache.net_id != self.id || cache.generation != self.generation || cache.activations.len() != self.layers.len() + 1 {
            return Err(ToyError::StaleCache);
        }
        if loss_grad.len() != self.output_dim() {
            return Err(ToyError::DimMismatch { expected: self.output_dim(), got: loss_grad.len() });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = loss_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[l];
            let y = &cache.activations[l + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(y)
                .map(|(g, out)| g * layer.activation.derivative_from_output(*out))
                .collect();
            let mut dw = vec![0.0; layer.weights.len()];
            let mut dx = vec![0.0; layer.inputs];
            for (r, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut dw[r * layer.inputs..(r + 1) * layer.inputs];
                let w = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for ((g, xi), (dxi, wi)) in row.iter_mut().zip(x).zip(dx.iter_mut().zip(w)) {
                    *g = d * xi;
                    *dxi += d * wi;
                }
            }
            grads.push((dw, delta));
            upstream = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// `θ += step · g` for every parameter.
    pub fn apply(&mut self, grads: &Gradients, step: f64) {
        for (layer, (dw, db)) in self.layers_mut().iter_mut().zip(&grads.layers) {
            layer.weights.iter_mut().zip(dw).for_each(|(w, g)| *w += step * g);
            layer.bias.iter_mut().zip(db).for_each(|(b, g)| *b += step * g);
        }
    }
}
