//! Minimal dense feedforward network engine.
//!
//! The crate needs exactly two network shapes (a state estimator and a
//! multi-step output predictor) plus their composition, so this module
//! implements a plain ReLU multilayer perceptron in `f64` with:
//!
//! - deterministic fan-in-scaled initialization,
//! - exact reverse-mode parameter gradients of a weighted squared-error loss,
//! - exact forward-mode Jacobians of the output with respect to an input
//!   slice (piecewise-linear, so finite differences agree away from kinks),
//! - an AdamW-style optimizer with decoupled weight decay.
//!
//! Inference is pure: a network is an immutable value and can be shared
//! across threads read-only. Batched data is laid out with one sample per
//! column (`dim x batch`).

mod adamw;

pub use adamw::{adamw_step, AdamWConfig, OptimizerState};

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use std::ops::Range;

use crate::error::{Error, Result};

/// Dense feedforward network: affine layers with rectified-linear hidden
/// activations and an identity output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    /// `weights[l]` has shape `(dims[l+1], dims[l])`.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Parameter-shaped structure holding one value per weight and bias.
/// Used for gradients and optimizer moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    /// All-zero gradients shaped like `net`.
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.dim())).collect(),
        }
    }

    /// Largest absolute entry, 0 for an empty structure.
    pub fn max_abs(&self) -> f64 {
        let w = self
            .weights
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0f64, |a, &x| a.max(x.abs()));
        self.biases
            .iter()
            .flat_map(|b| b.iter())
            .fold(w, |a, &x| a.max(x.abs()))
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn shape_matches(&self, net: &Mlp) -> bool {
        self.weights.len() == net.weights.len()
            && self.biases.len() == net.biases.len()
            && self
                .weights
                .iter()
                .zip(&net.weights)
                .all(|(g, w)| g.dim() == w.dim())
            && self
                .biases
                .iter()
                .zip(&net.biases)
                .all(|(g, b)| g.dim() == b.dim())
    }
}

/// Post-activation values of every layer for one forward pass, kept for the
/// backward pass. `activations[0]` is the input batch.
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Network output of the cached pass (`out_dim x batch`).
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds input + layers")
    }
}

impl Mlp {
    /// Builds a network with He-style initialization: weights drawn from
    /// `N(0, 2/fan_in)`, biases zero. The same seed yields bit-identical
    /// parameters.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Mlp> {
        if layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "layer_dims needs at least input and output dims, got {layer_dims:?}"
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer_dims must all be positive, got {layer_dims:?}"
            )));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for l in 0..layer_dims.len() - 1 {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let std = (2.0 / fan_in as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("std is finite and positive");
            let mut v = Vec::with_capacity(fan_out * fan_in);
            for _ in 0..fan_out * fan_in {
                v.push(dist.sample(&mut rng));
            }
            weights.push(Array2::from_shape_vec((fan_out, fan_in), v).expect("shape matches"));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Mlp {
            dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Assembles a network from explicit parameters, validating shapes.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Mlp> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "invalid layer_dims {layer_dims:?}"
            )));
        }
        if weights.len() != layer_dims.len() - 1 || biases.len() != layer_dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} layers of parameters, got {} weight and {} bias blocks",
                layer_dims.len() - 1,
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..weights.len() {
            if weights[l].dim() != (layer_dims[l + 1], layer_dims[l]) {
                return Err(Error::InvalidArgument(format!(
                    "weight block {l} has shape {:?}, expected ({}, {})",
                    weights[l].dim(),
                    layer_dims[l + 1],
                    layer_dims[l]
                )));
            }
            if biases[l].len() != layer_dims[l + 1] {
                return Err(Error::InvalidArgument(format!(
                    "bias block {l} has length {}, expected {}",
                    biases[l].len(),
                    layer_dims[l + 1]
                )));
            }
        }
        Ok(Mlp {
            dims: layer_dims,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    /// Total number of scalar parameters: sum of `d_in * d_out + d_out`.
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Forward pass on a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = Array1::from_vec(x.to_vec());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.dot(&a) + b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        Ok(a.to_vec())
    }

    /// Forward pass on a batch laid out one sample per column.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.activations.pop().expect("output"))
    }

    /// Forward pass keeping per-layer activations for a later backward pass.
    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<ForwardCache> {
        if x.nrows() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "batch has {} rows, network expects {}",
                x.nrows(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(x.clone());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.dot(activations.last().expect("nonempty"));
            for mut col in z.axis_iter_mut(Axis(1)) {
                col += b;
            }
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            activations.push(z);
        }
        Ok(ForwardCache { activations })
    }

    /// Reverse-mode pass: given `dL/d output` for the cached batch, returns
    /// parameter gradients and `dL/d input`.
    ///
    /// The ReLU subgradient at zero is taken as zero.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        output_grad: &Array2<f64>,
    ) -> (Gradients, Array2<f64>) {
        let layers = self.weights.len();
        assert_eq!(
            output_grad.dim(),
            cache.activations[layers].dim(),
            "output gradient shape must match cached output"
        );
        let mut grads = Gradients {
            weights: Vec::with_capacity(layers),
            biases: Vec::with_capacity(layers),
        };
        let mut g = output_grad.clone();
        for l in (0..layers).rev() {
            if l < layers - 1 {
                // Gate by the stored post-activation: a > 0 iff z > 0.
                g.zip_mut_with(&cache.activations[l + 1], |gv, &av| {
                    if av <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
            grads.weights.push(g.dot(&cache.activations[l].t()));
            grads.biases.push(g.sum_axis(Axis(1)));
            g = self.weights[l].t().dot(&g);
        }
        grads.weights.reverse();
        grads.biases.reverse();
        (grads, g)
    }

    /// Mean over the batch of the weighted squared error
    /// `sum_j weight_j * (out_j - target_j)^2`, together with its exact
    /// parameter gradient. `output_weights` has one nonnegative entry per
    /// output component and is shared across the batch.
    pub fn loss_and_param_gradient(
        &self,
        inputs: &Array2<f64>,
        targets: &Array2<f64>,
        output_weights: &Array1<f64>,
    ) -> Result<(f64, Gradients)> {
        if inputs.ncols() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if targets.dim() != (self.output_dim(), inputs.ncols()) {
            return Err(Error::InvalidArgument(format!(
                "targets have shape {:?}, expected ({}, {})",
                targets.dim(),
                self.output_dim(),
                inputs.ncols()
            )));
        }
        if output_weights.len() != self.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "output_weights has length {}, expected {}",
                output_weights.len(),
                self.output_dim()
            )));
        }
        if output_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument(
                "output_weights must be nonnegative".into(),
            ));
        }
        let cache = self.forward_cached(inputs)?;
        let err = cache.output() - targets;
        let batch = inputs.ncols() as f64;
        let mut loss = 0.0;
        for (j, row) in err.axis_iter(Axis(0)).enumerate() {
            let w = output_weights[j];
            loss += w * row.iter().map(|e| e * e).sum::<f64>();
        }
        loss /= batch;
        let mut out_grad = err;
        for (j, mut row) in out_grad.axis_iter_mut(Axis(0)).enumerate() {
            let s = 2.0 * output_weights[j] / batch;
            row.mapv_inplace(|e| s * e);
        }
        let (grads, _) = self.backward_batch(&cache, &out_grad);
        Ok((loss, grads))
    }

    /// Jacobian of the output with respect to the input components in
    /// `cols`, evaluated at `x`. Exact for the piecewise-linear network;
    /// matches central finite differences away from ReLU kinks.
    pub fn input_jacobian(&self, x: &[f64], cols: Range<usize>) -> Result<Array2<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if cols.end > self.input_dim() || cols.start > cols.end {
            return Err(Error::InvalidArgument(format!(
                "column slice {cols:?} out of range for input dim {}",
                self.input_dim()
            )));
        }
        let ncols = cols.end - cols.start;
        // Forward-mode accumulation: push the selected identity columns
        // through the same affine/ReLU chain as the input.
        let mut jac = Array2::zeros((self.input_dim(), ncols));
        for (j, i) in cols.clone().enumerate() {
            jac[(i, j)] = 1.0;
        }
        let mut a = Array1::from_vec(x.to_vec());
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.dot(&a) + b;
            let mut jz = w.dot(&jac);
            if l < last {
                for (i, &zi) in z.iter().enumerate() {
                    if zi <= 0.0 {
                        jz.row_mut(i).fill(0.0);
                    }
                }
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
            jac = jz;
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests;
