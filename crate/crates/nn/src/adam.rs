//! Bias-corrected Adam over a parameter store.

use crate::layers::ParamStore;
use crate::scalar::Scalar;
use crate::NnError;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment accumulators, in step with the parameter store order.
pub struct AdamState<S: Scalar> {
    pub m: Vec<Vec<S>>,
    pub v: Vec<Vec<S>>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(store: &ParamStore<S>) -> Self {
        let m = store.iter().map(|(_, _, t)| vec![S::zero(); t.len()]).collect();
        let v = store.iter().map(|(_, _, t)| vec![S::zero(); t.len()]).collect();
        AdamState { m, v, t: 0 }
    }
}

/// One update over all trainable parameters. Aborts with the parameter name
/// on any non-finite gradient.
pub fn adam_step<S: Scalar>(
    store: &mut ParamStore<S>,
    grads: &[Vec<S>],
    state: &mut AdamState<S>,
    config: &AdamConfig,
) -> Result<(), NnError> {
    assert_eq!(grads.len(), store.len(), "gradient count mismatch");
    state.t += 1;
    let t = state.t as i32;
    let b1 = S::from_f64(config.beta1);
    let b2 = S::from_f64(config.beta2);
    let lr = S::from_f64(config.lr);
    let eps = S::from_f64(config.eps);
    let corr1 = S::one() - b1.powi(t);
    let corr2 = S::one() - b2.powi(t);
    for idx in 0..store.len() {
        let id = crate::layers::ParamId(idx);
        if !store.is_trainable(id) {
            continue;
        }
        if !grads[idx].iter().all(|g| g.is_finite()) {
            return Err(NnError::NonFiniteGradient(store.name(id).to_string()));
        }
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let data = &mut store.tensor_mut(id).data;
        for i in 0..data.len() {
            let g = grads[idx][i];
            m[i] = b1 * m[i] + (S::one() - b1) * g;
            v[i] = b2 * v[i] + (S::one() - b2) * g * g;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
