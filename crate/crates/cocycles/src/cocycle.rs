//! Coboundary-built transport maps with their algebraic diagnostics.
//!
//! A model holds one conditional bijector stack `f[ctx]`. The transport
//! between contexts is `T[to,from] = f[to] ∘ f[from]⁻¹`, so identity and
//! path independence hold by construction up to floating-point round-trip.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bijectors::{BijectorStack, StackSpec};
use crate::error::{CocycleError, Result};
use crate::numerics::{ParameterVector, Scalar};

/// Which leading context coordinates are treatment vs covariates.
/// The context vector fed to conditioners is the concatenation `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLayout {
    pub x_dim: usize,
    pub z_dim: usize,
}

impl ContextLayout {
    pub fn context_dim(&self) -> usize {
        self.x_dim + self.z_dim
    }

    pub fn context(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.x_dim);
        assert_eq!(z.len(), self.z_dim);
        let mut c = Vec::with_capacity(self.context_dim());
        c.extend_from_slice(x);
        c.extend_from_slice(z);
        c
    }
}

/// A conditional bijector stack plus its fitted parameters.
#[derive(Debug, Clone)]
pub struct CocycleModel {
    pub stack: BijectorStack,
    pub params: ParameterVector,
    pub architecture_id: String,
    pub layout: ContextLayout,
}

/// Serialized form: the stack spec plus a flat block-name → scalars map.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    architecture_id: String,
    layout: ContextLayout,
    stack: StackSpec,
    params: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub max_identity_residual: f64,
    pub max_path_residual: f64,
}

impl CocycleModel {
    pub fn new(
        spec: StackSpec,
        layout: ContextLayout,
        architecture_id: impl Into<String>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if spec.context_dim != layout.context_dim() {
            return Err(CocycleError::ShapeMismatch(format!(
                "stack context dim {} != layout dim {}",
                spec.context_dim,
                layout.context_dim()
            )));
        }
        let stack = BijectorStack::new(spec)?;
        let params = stack.init_params(rng);
        Ok(CocycleModel { stack, params, architecture_id: architecture_id.into(), layout })
    }

    pub fn outcome_dim(&self) -> usize {
        self.stack.outcome_dim()
    }

    /// `f[ctx_to](f[ctx_from]⁻¹(y))` on plain values.
    pub fn transport(&self, ctx_to: &[f64], ctx_from: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(&[ctx_to, ctx_from], y)?;
        let u = self.stack.inverse::<f64>(self.params.flat(), ctx_from, y);
        Ok(self.stack.forward::<f64>(self.params.flat(), ctx_to, &u))
    }

    /// Taped transport for training: `params` are tape variables.
    pub fn transport_s<S: Scalar>(
        &self,
        params: &[S],
        ctx_to: &[f64],
        ctx_from: &[f64],
        y: &[S],
    ) -> Vec<S> {
        let u = self.stack.inverse(params, ctx_from, y);
        self.stack.forward(params, ctx_to, &u)
    }

    fn check_inputs(&self, ctxs: &[&[f64]], y: &[f64]) -> Result<()> {
        for c in ctxs {
            if c.len() != self.layout.context_dim() {
                return Err(CocycleError::ShapeMismatch(format!(
                    "context has {} coordinates, model expects {}",
                    c.len(),
                    self.layout.context_dim()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(CocycleError::Degenerate("non-finite context".into()));
            }
        }
        if y.len() != self.outcome_dim() {
            return Err(CocycleError::ShapeMismatch(format!(
                "outcome has {} coordinates, model expects {}",
                y.len(),
                self.outcome_dim()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CocycleError::Degenerate("non-finite outcome".into()));
        }
        Ok(())
    }

    /// Measures the identity and path-independence residuals on samples.
    /// A diagnostic against implementation bugs; the properties hold by
    /// construction for a coboundary model.
    pub fn check_algebra(&self, contexts: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<AlgebraReport> {
        if contexts.is_empty() || ys.is_empty() {
            return Err(CocycleError::Degenerate("check_algebra needs nonempty samples".into()));
        }
        let m = contexts.len();
        let mut id_res = 0.0f64;
        let mut path_res = 0.0f64;
        for (i, y) in ys.iter().enumerate() {
            for c in contexts {
                let t = self.transport(c, c, y)?;
                for (a, b) in t.iter().zip(y) {
                    id_res = id_res.max((a - b).abs());
                }
            }
            // walk a spread of ordered triples without enumerating all m³
            for step in 0..m {
                let c0 = &contexts[i % m];
                let c1 = &contexts[(i + step) % m];
                let c2 = &contexts[(i + 2 * step + 1) % m];
                let direct = self.transport(c2, c0, y)?;
                let hop = self.transport(c1, c0, y)?;
                let composed = self.transport(c2, c1, &hop)?;
                for (a, b) in composed.iter().zip(&direct) {
                    path_res = path_res.max((a - b).abs());
                }
            }
        }
        Ok(AlgebraReport { max_identity_residual: id_res, max_path_residual: path_res })
    }

    /// Model parameters as a flat JSON document (block name → scalar list),
    /// wrapped with the stack spec so the model can be rebuilt.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            architecture_id: self.architecture_id.clone(),
            layout: self.layout,
            stack: self.stack.spec.clone(),
            params: self.params.to_json_map(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(json)?;
        let stack = BijectorStack::new(doc.stack)?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let mut params = stack.init_params(&mut rng);
        params.load_json_map(&doc.params)?;
        params.check_finite()?;
        Ok(CocycleModel {
            stack,
            params,
            architecture_id: doc.architecture_id,
            layout: doc.layout,
        })
    }
}
