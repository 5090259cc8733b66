//! Conditioners map a transform's context (treatment, covariates, and any
//! autoregressive prefix) to the parameter bundle of one bijector layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{ParameterVector, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// How a layer's parameter bundle depends on its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionerSpec {
    /// One bundle per discrete value of the first context coordinate.
    /// Ignores covariates and autoregressive inputs.
    ConstantTable { levels: usize },
    Linear,
    Mlp {
        #[serde(default = "default_layers")]
        layers: usize,
        #[serde(default = "default_width")]
        width: usize,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
}

fn default_layers() -> usize {
    2
}
fn default_width() -> usize {
    32
}
fn default_activation() -> Activation {
    Activation::Tanh
}

impl ConditionerSpec {
    pub fn mlp() -> Self {
        ConditionerSpec::Mlp {
            layers: default_layers(),
            width: default_width(),
            activation: default_activation(),
        }
    }
}

/// A conditioner instantiated for a concrete input split and bundle size.
///
/// Inputs arrive in two parts: `data` (context coordinates, observed — never
/// differentiated) and `state` (autoregressive prefix values that may carry
/// gradients).
#[derive(Debug, Clone)]
pub struct Conditioner {
    pub spec: ConditionerSpec,
    pub data_dim: usize,
    pub state_dim: usize,
    pub out_dim: usize,
}

impl Conditioner {
    pub fn new(spec: ConditionerSpec, data_dim: usize, state_dim: usize, out_dim: usize) -> Self {
        Conditioner { spec, data_dim, state_dim, out_dim }
    }

    fn in_dim(&self) -> usize {
        self.data_dim + self.state_dim
    }

    pub fn param_count(&self) -> usize {
        match &self.spec {
            ConditionerSpec::ConstantTable { levels } => levels * self.out_dim,
            ConditionerSpec::Linear => (self.in_dim() + 1) * self.out_dim,
            ConditionerSpec::Mlp { layers, width, .. } => {
                let mut n = (self.in_dim() + 1) * width; // input layer
                n += (width + 1) * width * (layers - 1); // hidden layers
                n += (width + 1) * self.out_dim; // output layer
                n
            }
        }
    }

    /// Appends this conditioner's parameter blocks to `pv`.
    ///
    /// Dense weights are drawn uniform(±1/√fan_in); the bias of the layer
    /// that emits the bundle is set to `identity_bundle` so the bijector
    /// starts at (near-)identity.
    pub fn append_params(
        &self,
        prefix: &str,
        identity_bundle: &[f64],
        rng: &mut impl Rng,
        pv: &mut ParameterVector,
    ) {
        assert_eq!(identity_bundle.len(), self.out_dim);
        let uniform = |rng: &mut dyn rand::RngCore, fan_in: usize, n: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        match &self.spec {
            ConditionerSpec::ConstantTable { levels } => {
                let mut table = Vec::with_capacity(levels * self.out_dim);
                for _ in 0..*levels {
                    table.extend_from_slice(identity_bundle);
                }
                pv.push_block(format!("{prefix}.table"), &table);
            }
            ConditionerSpec::Linear => {
                let w = uniform(rng, self.in_dim(), self.in_dim() * self.out_dim);
                pv.push_block(format!("{prefix}.w"), &w);
                pv.push_block(format!("{prefix}.b"), identity_bundle);
            }
            ConditionerSpec::Mlp { layers, width, .. } => {
                let mut fan_in = self.in_dim();
                for l in 0..*layers {
                    let w = uniform(rng, fan_in, fan_in * width);
                    let b = uniform(rng, fan_in, *width);
                    pv.push_block(format!("{prefix}.w{l}"), &w);
                    pv.push_block(format!("{prefix}.b{l}"), &b);
                    fan_in = *width;
                }
                let w = uniform(rng, fan_in, fan_in * self.out_dim);
                pv.push_block(format!("{prefix}.w{layers}"), &w);
                pv.push_block(format!("{prefix}.b{layers}"), identity_bundle);
            }
        }
    }

    /// Evaluates the bundle. `params` is this conditioner's own slice of the
    /// flat parameter vector.
    pub fn eval<S: Scalar>(&self, params: &[S], data: &[f64], state: &[S], out: &mut Vec<S>) {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(data.len(), self.data_dim);
        debug_assert_eq!(state.len(), self.state_dim);
        out.clear();
        match &self.spec {
            ConditionerSpec::ConstantTable { levels } => {
                let level = data[0].round();
                assert!(
                    level >= 0.0 && (level as usize) < *levels && (data[0] - level).abs() < 1e-6,
                    "constant-table conditioner needs an integral treatment in 0..{levels}, got {}",
                    data[0]
                );
                let start = level as usize * self.out_dim;
                out.extend_from_slice(&params[start..start + self.out_dim]);
            }
            ConditionerSpec::Linear => {
                let (w, b) = params.split_at(self.in_dim() * self.out_dim);
                for o in 0..self.out_dim {
                    let row = &w[o * self.in_dim()..(o + 1) * self.in_dim()];
                    out.push(dense_row(row, self.data_dim, data, state, b[o]));
                }
            }
            ConditionerSpec::Mlp { layers, width, activation } => {
                let mut offset = 0;
                let mut take = |n: usize| {
                    let s = &params[offset..offset + n];
                    offset += n;
                    s
                };
                let mut hidden: Vec<S> = Vec::with_capacity(*width);
                let mut next: Vec<S> = Vec::with_capacity(*width);
                // input layer consumes the data/state split
                {
                    let w = take(self.in_dim() * width);
                    let b = take(*width);
                    for o in 0..*width {
                        let row = &w[o * self.in_dim()..(o + 1) * self.in_dim()];
                        let z = dense_row(row, self.data_dim, data, state, b[o]);
                        hidden.push(activate(z, *activation));
                    }
                }
                for _ in 1..*layers {
                    let w = take(width * width);
                    let b = take(*width);
                    next.clear();
                    for o in 0..*width {
                        let row = &w[o * width..(o + 1) * width];
                        let z = S::dot(row, &hidden) + b[o];
                        next.push(activate(z, *activation));
                    }
                    std::mem::swap(&mut hidden, &mut next);
                }
                let w = take(width * self.out_dim);
                let b = take(self.out_dim);
                for o in 0..self.out_dim {
                    let row = &w[o * width..(o + 1) * width];
                    out.push(S::dot(row, &hidden) + b[o]);
                }
            }
        }
    }
}

fn dense_row<S: Scalar>(row: &[S], data_dim: usize, data: &[f64], state: &[S], bias: S) -> S {
    let mut z = bias;
    if data_dim > 0 {
        z = z + S::dot_data(&row[..data_dim], data);
    }
    if !state.is_empty() {
        z = z + S::dot(&row[data_dim..], state);
    }
    z
}

fn activate<S: Scalar>(z: S, a: Activation) -> S {
    match a {
        Activation::Tanh => z.tanh(),
        Activation::Relu => z.clamp_val(0.0, f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn eval_f64(c: &Conditioner, params: &[f64], data: &[f64], state: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        c.eval::<f64>(params, data, state, &mut out);
        out
    }

    #[test]
    fn table_returns_the_selected_bundle_exactly() {
        let c = Conditioner::new(ConditionerSpec::ConstantTable { levels: 3 }, 1, 0, 2);
        let params = [10.0, 11.0, 20.0, 21.0, 30.0, 31.0];
        assert_eq!(eval_f64(&c, &params, &[0.0], &[]), vec![10.0, 11.0]);
        assert_eq!(eval_f64(&c, &params, &[1.0], &[]), vec![20.0, 21.0]);
        assert_eq!(eval_f64(&c, &params, &[2.0], &[]), vec![30.0, 31.0]);
    }

    #[test]
    fn linear_with_zero_weights_returns_bias() {
        let c = Conditioner::new(ConditionerSpec::Linear, 2, 1, 3);
        let mut params = vec![0.0; c.param_count()];
        params[9..12].copy_from_slice(&[1.0, 2.0, 3.0]); // bias
        let out = eval_f64(&c, &params, &[5.0, -3.0], &[7.0]);
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn mlp_output_matches_requested_bundle_size() {
        let c = Conditioner::new(ConditionerSpec::mlp(), 9, 0, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pv = ParameterVector::new();
        c.append_params("c", &vec![0.0; 23], &mut rng, &mut pv);
        assert_eq!(pv.total_dim(), c.param_count());
        let ctx: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let out = eval_f64(&c, pv.flat(), &ctx, &[]);
        assert_eq!(out.len(), 23);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn identity_bias_puts_bundle_near_identity() {
        let ident = vec![0.25; 4];
        let c = Conditioner::new(ConditionerSpec::mlp(), 1, 0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pv = ParameterVector::new();
        c.append_params("c", &ident, &mut rng, &mut pv);
        let out = eval_f64(&c, pv.flat(), &[0.3], &[]);
        for (o, i) in out.iter().zip(&ident) {
            assert!((o - i).abs() < 1.5, "bundle {o} too far from identity {i}");
        }
    }
}
