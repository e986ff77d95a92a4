//! Mean-squared-error reconstruction loss and the Adam optimizer.

use crate::error::{Error, Result};
use crate::tensor::{QTensor, RealTensor};
use serde::{Deserialize, Serialize};

/// Adam moment accumulators over a flat parameter vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr: f64,
}

impl AdamState {
    /// Vanilla hyperparameters (β₁ = 0.9, β₂ = 0.999, ε = 1e-8) at the given
    /// learning rate.
    pub fn new(param_count: usize, lr: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr,
        }
    }
}

/// One Adam update with bias correction, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(format!(
            "parameter/gradient/state length mismatch: {} / {} / {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

fn mse_slices(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for ((g, &p), &t) in grad.iter_mut().zip(pred.iter()).zip(target.iter()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    (loss / n, grad)
}

/// Mean squared error over all real components, with its gradient w.r.t. the
/// prediction.
pub fn mse_loss(pred: &QTensor, target: &QTensor) -> Result<(f64, QTensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let (loss, grad) = mse_slices(pred.data(), target.data());
    let (c, h, w) = pred.shape();
    Ok((loss, QTensor::from_data(c, h, w, grad)?))
}

pub fn mse_loss_real(pred: &RealTensor, target: &RealTensor) -> Result<(f64, RealTensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "mse shapes differ: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let (loss, grad) = mse_slices(pred.data(), target.data());
    let (c, h, w) = pred.shape();
    Ok((loss, RealTensor::from_data(c, h, w, grad)?))
}
