//! Adam optimizer state and update rule.

use serde::{Deserialize, Serialize};

use crate::error::{CocycleError, Result};
use crate::numerics::params::ParameterVector;

/// Moment estimates plus hyperparameters for one optimized vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Defaults: β1=0.9, β2=0.999, eps=1e-8.
    pub fn new(dim: usize, lr: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction. Pure: returns the new state and the
/// updated parameters.
pub fn adam_step(
    state: &AdamState,
    params: &ParameterVector,
    grads: &ParameterVector,
) -> Result<(AdamState, ParameterVector)> {
    if !params.same_shape(grads) {
        return Err(CocycleError::ShapeMismatch(
            "gradient blocks do not match parameter blocks".into(),
        ));
    }
    if state.first_moment.len() != params.total_dim() {
        return Err(CocycleError::ShapeMismatch(format!(
            "optimizer state holds {} entries, parameters hold {}",
            state.first_moment.len(),
            params.total_dim()
        )));
    }
    grads.check_finite().map_err(|_| CocycleError::NonFiniteGrad {
        block: grads
            .flat()
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| grads.block_of(i).to_string())
            .unwrap_or_default(),
    })?;

    let mut next = state.clone();
    next.step_count = state.step_count + 1;
    let t = next.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);

    let mut values = params.flat().to_vec();
    for (i, g) in grads.flat().iter().enumerate() {
        let m = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        let v = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        next.first_moment[i] = m;
        next.second_moment[i] = v;
        values[i] -= state.lr * (m / bc1) / ((v / bc2).sqrt() + state.eps);
    }
    Ok((next, params.with_values(values)))
}
