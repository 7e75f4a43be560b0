//! Gradient clipping and the ADAM parameter update.

use super::TensorSet;
use crate::{Error, Result};

/// ADAM moment decay rates and stabilizer. The canonical constants are the
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: TensorSet,
    v: TensorSet,
    step: u64,
}

impl AdamState {
    /// Zero-initialized moments shaped like the parameters.
    pub fn new(shape: &TensorSet) -> Self {
        let mut m = shape.clone();
        m.scale(0.0);
        Self { v: m.clone(), m, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Scales all gradients by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`; returns the pre-clip norm. `INFINITY` disables clipping.
pub fn clip_gradients(grads: &mut TensorSet, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::InvalidParam(format!(
            "max_norm must be positive, got {max_norm}"
        )));
    }
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    Ok(norm)
}

/// One bias-corrected ADAM update applied in place.
pub fn adam_step(
    params: &mut TensorSet,
    grads: &TensorSet,
    state: &mut AdamState,
    learning_rate: f64,
    hyper: &AdamParams,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let param_slices = params.tensor_slices_mut();
    let grad_slices = grads.tensor_slices();
    let m_slices = state.m.tensor_slices_mut();
    let v_slices = state.v.tensor_slices_mut();
    for (((p_t, g_t), m_t), v_t) in param_slices
        .into_iter()
        .zip(grad_slices)
        .zip(m_slices)
        .zip(v_slices)
    {
        for (((p, &g), m), v) in p_t.iter_mut().zip(g_t.iter()).zip(m_t.iter_mut()).zip(v_t.iter_mut())
        {
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    }
}
