//! Learnable base distributions for the maximum-likelihood flow baseline,
//! and the flow-SCM wrapper that pairs one with a bijector stack.

use serde::{Deserialize, Serialize};

use crate::bijectors::StackSpec;
use crate::cocycle::{CocycleModel, ContextLayout};
use crate::error::Result;
use crate::numerics::{ParameterVector, Scalar};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseFamily {
    Gaussian,
    Laplace,
    StudentT,
}

/// Location/scale per outcome dimension (scale stored as a log), plus a
/// log degrees-of-freedom for the Student-t family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseDistribution {
    pub family: BaseFamily,
    pub dim: usize,
}

impl BaseDistribution {
    pub fn new(family: BaseFamily, dim: usize) -> Self {
        BaseDistribution { family, dim }
    }

    pub fn param_count(&self) -> usize {
        match self.family {
            BaseFamily::Gaussian | BaseFamily::Laplace => 2 * self.dim,
            BaseFamily::StudentT => 2 * self.dim + 1,
        }
    }

    /// Appends location 0, scale 1 (log-scale 0), and dof 10 where relevant.
    pub fn append_params(&self, pv: &mut ParameterVector) {
        pv.push_block("base.loc", &vec![0.0; self.dim]);
        pv.push_block("base.log_scale", &vec![0.0; self.dim]);
        if self.family == BaseFamily::StudentT {
            pv.push_block("base.log_dof", &[10.0f64.ln()]);
        }
    }

    /// Joint log density at `u` (independent coordinates). `params` is this
    /// distribution's own slice of the flat vector.
    pub fn log_pdf<S: Scalar>(&self, params: &[S], u: &[S]) -> S {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(u.len(), self.dim);
        let loc = &params[..self.dim];
        let log_scale = &params[self.dim..2 * self.dim];
        let mut ll = u[0].constant_like(0.0);
        match self.family {
            BaseFamily::Gaussian => {
                for d in 0..self.dim {
                    let ls = log_scale[d].clamp_val(-10.0, 10.0);
                    let z = (u[d] - loc[d]) * (-ls).exp();
                    ll = ll - z * z * 0.5 - ls - HALF_LN_2PI;
                }
            }
            BaseFamily::Laplace => {
                for d in 0..self.dim {
                    let ls = log_scale[d].clamp_val(-10.0, 10.0);
                    let z = (u[d] - loc[d]) * (-ls).exp();
                    ll = ll - z.abs() - ls - 2.0f64.ln();
                }
            }
            BaseFamily::StudentT => {
                let nu = params[2 * self.dim].clamp_val(-3.0, 8.0).exp();
                for d in 0..self.dim {
                    let ls = log_scale[d].clamp_val(-10.0, 10.0);
                    let z = (u[d] - loc[d]) * (-ls).exp();
                    let half_nu = nu * 0.5;
                    let a = (half_nu + 0.5).ln_gamma() - half_nu.ln_gamma()
                        - (nu * std::f64::consts::PI).ln() * 0.5
                        - ls;
                    ll = ll + a - (half_nu + 0.5) * (z * z / nu + 1.0).ln();
                }
            }
        }
        ll
    }
}

/// Flow-based structural model: a conditional bijector stack trained by
/// maximum likelihood against a fixed-family learnable base distribution.
/// The induced transports come from the stack alone.
#[derive(Debug, Clone)]
pub struct FlowScm {
    pub model: CocycleModel,
    pub base: BaseDistribution,
}

impl FlowScm {
    pub fn new(
        spec: StackSpec,
        layout: ContextLayout,
        architecture_id: impl Into<String>,
        family: BaseFamily,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        let dim = spec.outcome_dim;
        let mut model = CocycleModel::new(spec, layout, architecture_id, rng)?;
        let base = BaseDistribution::new(family, dim);
        base.append_params(&mut model.params);
        Ok(FlowScm { model, base })
    }

    /// Flat length of the stack part of the parameter vector.
    pub fn stack_param_count(&self) -> usize {
        self.model.params.total_dim() - self.base.param_count()
    }
}
