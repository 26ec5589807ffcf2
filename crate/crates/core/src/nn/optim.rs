use ndarray::Zip;

use super::params::{Grads, ParamSet};
use super::tape::Matrix;
use crate::error::{check_range, ArenaError, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = params.values().iter().map(|v| Matrix::zeros(v.dim())).collect();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, first: zeros.clone(), second: zeros }
    }

    pub fn update(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<()> {
        if grads.0.len() != params.len() || grads.0.iter().zip(params.values()).any(|(g, p)| g.dim() != p.dim()) {
            return Err(ArenaError::Dimension("gradients do not mirror the parameter set".into()));
        }
        if !grads.is_finite() {
            return Err(ArenaError::NonFinite("gradient".into()));
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (lr, eps) = (self.learning_rate, self.epsilon);
        for (((p, g), m), v) in params.values_mut().iter_mut().zip(&grads.0).zip(&mut self.first).zip(&mut self.second)
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}

/// Convenience wrapper: one Adam step.
pub fn adam_step(params: &mut ParamSet, grads: &Grads, state: &mut AdamState) -> Result<()> {
    state.update(params, grads)
}

/// `target ← τ·online + (1 − τ)·target`, elementwise.
pub fn soft_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<()> {
    check_range("tau", tau, f64::MIN_POSITIVE, 1.0)?;
    target.check_layout(online)?;
    for (t, o) in target.values_mut().iter_mut().zip(online.values()) {
        Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
    Ok(())
}
