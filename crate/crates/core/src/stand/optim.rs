use crate::ndcore::Matrix;

use super::params::ParamTensors;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new<P: ParamTensors>(params: &P) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// Adam with bias correction.
pub fn adam_step<P: ParamTensors>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        let p = p.as_mut_slice();
        let m = m.as_mut_slice();
        let v = v.as_mut_slice();
        for (k, &gk) in g.as_slice().iter().enumerate() {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// `θ ← θ − η ∇J(θ)`
pub fn gd_step<P: ParamTensors>(params: &mut P, grads: &P, lr: f64) {
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        crate::ndcore::axpy(-lr, g.as_slice(), p.as_mut_slice());
    }
}
