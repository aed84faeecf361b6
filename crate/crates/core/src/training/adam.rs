use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::Params;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Params,
    pub v: Params,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// Bias-corrected Adam update on flat slices; `step` is 1-based.
pub fn adam_update(theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, step: u64, cfg: &TrainConfig) {
    let bc1 = 1.0 - cfg.beta1.powf(step as f64);
    let bc2 = 1.0 - cfg.beta2.powf(step as f64);
    for i in 0..theta.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Applies one Adam step to every tensor. Gradients are checked before any
/// parameter changes; parameters are checked afterwards.
pub fn adam_step(params: &mut Params, grads: &Params, state: &mut AdamState, lr: f64, cfg: &TrainConfig) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidParams(format!("learning rate {lr} must be positive")));
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGrad(name));
    }
    state.step += 1;
    let step = state.step;
    let tensors = params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    let gs = grads.tensors();
    if tensors.len() != gs.len() || ms.len() != gs.len() {
        return Err(Error::Shape("gradient layout does not match parameters".into()));
    }
    for (((p, m), v), g) in tensors.into_iter().zip(ms).zip(vs).zip(gs) {
        if p.data.len() != g.data.len() || p.name != g.name {
            return Err(Error::Shape(format!("gradient for `{}` does not match `{}`", g.name, p.name)));
        }
        adam_update(p.data, m.data, v.data, g.data, lr, step, cfg);
    }
    match params.first_non_finite() {
        Some(name) => Err(Error::NonFiniteParam(name)),
        None => Ok(()),
    }
}
