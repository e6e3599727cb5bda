//! Bias-corrected adaptive-moment optimizer with a single step decay.

use serde::{Deserialize, Serialize};

use super::model::{ModelParams, ParamGrads, Parameter};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of training after which the learning rate is divided by 10.
    pub decay_point: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, decay_point: 0.8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && (0.0..=1.0).contains(&self.decay_point);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer settings: {self:?}")))
        }
    }

    /// Learning rate at a given fraction of training.
    pub fn effective_lr(&self, progress: f64) -> f64 {
        if progress >= self.decay_point {
            self.learning_rate * 0.1
        } else {
            self.learning_rate
        }
    }
}

/// Applies one update in place and increments the step counter.
///
/// Fails without touching the parameters if any gradient is non-finite.
pub fn adam_step(params: &mut ModelParams, grads: &ParamGrads, cfg: &OptimizerConfig, progress: f64) -> Result<()> {
    if grads.0.len() != params.params.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gradient tensors for {} parameters",
            grads.0.len(),
            params.params.len()
        )));
    }
    for (p, g) in params.params.iter().zip(&grads.0) {
        if g.len() != p.value.len() {
            return Err(Error::ShapeMismatch(format!("gradient for {} has {} values", p.name, g.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
    }
    let t = params.step + 1;
    let lr = cfg.effective_lr(progress);
    let c1 = 1.0 - cfg.beta1.powf(t as f64);
    let c2 = 1.0 - cfg.beta2.powf(t as f64);
    for (p, g) in params.params.iter_mut().zip(&grads.0) {
        let Parameter { value, first_moment, second_moment, .. } = p;
        for (((w, m), v), &gi) in value.values_mut().iter_mut().zip(first_moment.iter_mut()).zip(second_moment.iter_mut()).zip(g)
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    params.step = t;
    Ok(())
}
