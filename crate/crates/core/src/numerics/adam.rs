use crate::error::{Error, Result};

use super::Tensor;

/// Adam optimizer state for a fixed, ordered parameter list.
///
/// Moment buffers are keyed by position, so callers must pass the same
/// parameters in the same order on every step.
#[derive(Clone, Debug)]
pub struct AdamState {
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self::with(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1,
            beta2,
            eps,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place, over every parameter.
///
/// Every parameter must carry a populated gradient.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState) -> Result<()> {
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        state.v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
    }
    if state.m.len() != params.len() {
        return Err(Error::Contract(format!(
            "adam_step called with {} params but state tracks {}",
            params.len(),
            state.m.len()
        )));
    }

    let t = state.step + 1;
    let bc1 = 1.0 - state.beta1.powi(t as i32);
    let bc2 = 1.0 - state.beta2.powi(t as i32);

    for (idx, p) in params.iter_mut().enumerate() {
        if state.m[idx].len() != p.numel() {
            return Err(Error::Contract(format!(
                "adam_step: param {idx} changed size ({} -> {})",
                state.m[idx].len(),
                p.numel()
            )));
        }
        let g = p.grad().ok_or_else(|| {
            Error::Contract(format!("adam_step: param {idx} has no gradient"))
        })?;
        let g = g.to_vec();
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let data = p.data_mut();
        for i in 0..data.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    state.step = t;
    Ok(())
}
