//! Adaptive optimizer with decoupled weight decay.

use ndarray::{Array1, Array2};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Hyperparameters of the update rule. Defaults mirror the commonly
/// published defaults for decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

/// First/second moment accumulators plus the step counter, shaped like the
/// network they update.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    step: u64,
    first_moment: Gradients,
    second_moment: Gradients,
}

impl OptimizerState {
    /// Fresh state with zero moments at step 0.
    pub fn new(net: &Mlp) -> Self {
        OptimizerState {
            step: 0,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

fn update_tensor_pair(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamWConfig,
    bias_corr1: f64,
    bias_corr2: f64,
) {
    let lr = cfg.learning_rate;
    let decay = 1.0 - lr * cfg.weight_decay;
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bias_corr1;
        let v_hat = v[i] / bias_corr2;
        param[i] = param[i] * decay - lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One bias-corrected adaptive update with decoupled weight decay. The step
/// counter advances by exactly one. Non-finite gradient entries leave the
/// network and state untouched and report a numeric error.
pub fn adamw_step(
    net: &mut Mlp,
    grad: &Gradients,
    cfg: &AdamWConfig,
    state: &mut OptimizerState,
) -> Result<()> {
    if !grad.shape_matches(net) {
        return Err(Error::InvalidArgument(
            "gradient shape does not match network".into(),
        ));
    }
    if !grad.is_finite() {
        return Err(Error::Numeric(
            "non-finite gradient entries; parameters unchanged".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bias_corr1 = 1.0 - cfg.beta1.powi(t);
    let bias_corr2 = 1.0 - cfg.beta2.powi(t);
    for l in 0..net.weights.len() {
        let w: &mut Array2<f64> = &mut net.weights[l];
        update_tensor_pair(
            w.as_slice_mut().expect("standard layout"),
            grad.weights[l].as_slice().expect("standard layout"),
            state.first_moment.weights[l]
                .as_slice_mut()
                .expect("standard layout"),
            state.second_moment.weights[l]
                .as_slice_mut()
                .expect("standard layout"),
            cfg,
            bias_corr1,
            bias_corr2,
        );
        let b: &mut Array1<f64> = &mut net.biases[l];
        update_tensor_pair(
            b.as_slice_mut().expect("standard layout"),
            grad.biases[l].as_slice().expect("standard layout"),
            state.first_moment.biases[l]
                .as_slice_mut()
                .expect("standard layout"),
            state.second_moment.biases[l]
                .as_slice_mut()
                .expect("standard layout"),
            cfg,
            bias_corr1,
            bias_corr2,
        );
    }
    Ok(())
}
