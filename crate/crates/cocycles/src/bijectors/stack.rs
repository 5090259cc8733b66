//! Ordered composition of TMI layers sharing one flat parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bijectors::layer::{Layer, LayerSpec};
use crate::error::Result;
use crate::numerics::{ParameterVector, Scalar};

/// Declarative description of a bijector stack; serializable so a model can
/// be rebuilt from its persisted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub outcome_dim: usize,
    pub context_dim: usize,
    pub layers: Vec<LayerSpec>,
}

/// An instantiated stack. Forward applies layers in order; the exact inverse
/// applies layer inverses in reverse order.
#[derive(Debug, Clone)]
pub struct BijectorStack {
    pub spec: StackSpec,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
}

/// Context-only conditioner bundles for one context; see
/// [`BijectorStack::context_bundles`].
pub struct BundleCache<S> {
    per_layer: Vec<Vec<Option<Vec<S>>>>,
}

impl BijectorStack {
    pub fn new(spec: StackSpec) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            layers.push(Layer::new(l.clone(), spec.outcome_dim, spec.context_dim)?);
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        offsets.push(total);
        Ok(BijectorStack { spec, layers, offsets })
    }

    pub fn outcome_dim(&self) -> usize {
        self.spec.outcome_dim
    }

    pub fn context_dim(&self) -> usize {
        self.spec.context_dim
    }

    pub fn param_count(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Fresh parameters: conditioner weights uniform(±1/√fan_in), bundle
    /// biases at the identity transform.
    pub fn init_params(&self, rng: &mut impl Rng) -> ParameterVector {
        let mut pv = ParameterVector::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.append_params(&format!("layer{i}"), rng, &mut pv);
        }
        if pv.total_dim() == 0 {
            // degenerate but legal: a stack of parameter-free layers
            pv.push_block("empty", &[]);
        }
        pv
    }

    fn layer_params<'a, S>(&self, params: &'a [S], i: usize) -> &'a [S] {
        &params[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Precomputed bundles for every context-only conditioner, reusable
    /// across all evaluations sharing one context. This is what makes the
    /// pairwise transport batch affordable: conditioner networks run once
    /// per context, not once per pair.
    pub fn context_bundles<S: Scalar>(&self, params: &[S], ctx: &[f64]) -> BundleCache<S> {
        BundleCache {
            per_layer: self
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| l.context_bundles(self.layer_params(params, i), ctx))
                .collect(),
        }
    }

    pub fn forward<S: Scalar>(&self, params: &[S], ctx: &[f64], input: &[S]) -> Vec<S> {
        let mut v = input.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            v = l.forward(self.layer_params(params, i), ctx, &v);
        }
        v
    }

    pub fn forward_cached<S: Scalar>(
        &self,
        params: &[S],
        ctx: &[f64],
        input: &[S],
        cache: &BundleCache<S>,
    ) -> Vec<S> {
        let mut v = input.to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            v = l
                .forward_ldj_cached(self.layer_params(params, i), ctx, &v, Some(&cache.per_layer[i]))
                .0;
        }
        v
    }

    pub fn inverse<S: Scalar>(&self, params: &[S], ctx: &[f64], output: &[S]) -> Vec<S> {
        let mut v = output.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            v = l.inverse(self.layer_params(params, i), ctx, &v);
        }
        v
    }

    pub fn inverse_cached<S: Scalar>(
        &self,
        params: &[S],
        ctx: &[f64],
        output: &[S],
        cache: &BundleCache<S>,
    ) -> Vec<S> {
        let mut v = output.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            v = l
                .inverse_ldj_cached(self.layer_params(params, i), ctx, &v, Some(&cache.per_layer[i]))
                .0;
        }
        v
    }

    /// Forward image and log|det| of the forward Jacobian.
    pub fn forward_ldj<S: Scalar>(&self, params: &[S], ctx: &[f64], input: &[S]) -> (Vec<S>, S) {
        let mut v = input.to_vec();
        let mut ldj = input[0].constant_like(0.0);
        for (i, l) in self.layers.iter().enumerate() {
            let (next, l_ldj) = l.forward_ldj(self.layer_params(params, i), ctx, &v);
            v = next;
            ldj = ldj + l_ldj;
        }
        (v, ldj)
    }

    /// Exact inverse and log|det| of the *forward* Jacobian at the recovered
    /// point (negate for the inverse map's Jacobian).
    pub fn inverse_ldj<S: Scalar>(&self, params: &[S], ctx: &[f64], output: &[S]) -> (Vec<S>, S) {
        let mut v = output.to_vec();
        let mut ldj = output[0].constant_like(0.0);
        for (i, l) in self.layers.iter().enumerate().rev() {
            let (prev, l_ldj) = l.inverse_ldj(self.layer_params(params, i), ctx, &v);
            v = prev;
            ldj = ldj + l_ldj;
        }
        (v, ldj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijectors::conditioner::ConditionerSpec;
    use crate::bijectors::layer::LayerKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spline_stack(p: usize, ctx: usize) -> BijectorStack {
        let spec = StackSpec {
            outcome_dim: p,
            context_dim: ctx,
            layers: vec![
                LayerSpec::new(LayerKind::MaskedAffineAutoregressive, ConditionerSpec::mlp()),
                LayerSpec::new(
                    LayerKind::RationalQuadraticSpline { bins: 8, tail_bound: 5.0 },
                    ConditionerSpec::mlp(),
                ),
                LayerSpec::new(LayerKind::MaskedAffineAutoregressive, ConditionerSpec::mlp()),
            ],
        };
        BijectorStack::new(spec).unwrap()
    }

    #[test]
    fn shift_layer_forward_and_inverse() {
        let spec = StackSpec {
            outcome_dim: 2,
            context_dim: 1,
            layers: vec![LayerSpec::new(
                LayerKind::Shift,
                ConditionerSpec::ConstantTable { levels: 1 },
            )],
        };
        let stack = BijectorStack::new(spec).unwrap();
        let params = [1.0, -2.0];
        let out = stack.forward::<f64>(&params, &[0.0], &[0.0, 0.0]);
        assert_eq!(out, vec![1.0, -2.0]);
        let back = stack.inverse::<f64>(&params, &[0.0], &[1.0, -2.0]);
        assert_eq!(back, vec![0.0, 0.0]);
        let (_, ldj) = stack.forward_ldj::<f64>(&params, &[0.0], &[0.3, 0.4]);
        assert_eq!(ldj, 0.0);
    }

    #[test]
    fn triangular_affine_matches_hand_matrix() {
        // L = [[2,0],[1,1]], b = 0: forward((1,1)) = (2, 2)
        let spec = StackSpec {
            outcome_dim: 2,
            context_dim: 1,
            layers: vec![LayerSpec::new(
                LayerKind::TriangularAffine,
                ConditionerSpec::ConstantTable { levels: 1 },
            )],
        };
        let stack = BijectorStack::new(spec).unwrap();
        // bundle: [diag_raw(2), lower(1), bias(2)]
        let params = [2.0f64.ln(), 0.0, 1.0, 0.0, 0.0];
        let out = stack.forward::<f64>(&params, &[0.0], &[1.0, 1.0]);
        assert!((out[0] - 2.0).abs() < 1e-12);
        assert!((out[1] - 2.0).abs() < 1e-12);
        let back = stack.inverse::<f64>(&params, &[0.0], &out);
        assert!((back[0] - 1.0).abs() < 1e-12);
        assert!((back[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn masked_affine_log_det_sums_log_scales() {
        let spec = StackSpec {
            outcome_dim: 3,
            context_dim: 1,
            layers: vec![LayerSpec::new(
                LayerKind::MaskedAffineAutoregressive,
                ConditionerSpec::Linear,
            )],
        };
        let stack = BijectorStack::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pv = stack.init_params(&mut rng);
        // force every log-scale bias to ln 2 (bias blocks are named .b)
        let names: Vec<String> = pv.block_names().map(str::to_string).collect();
        for n in names {
            if n.ends_with(".b") {
                let mut vals = pv.block(&n).unwrap().to_vec();
                vals[0] = 2.0f64.ln();
                let flat_start = pv
                    .block_names()
                    .position(|bn| bn == n)
                    .map(|i| pv.block_range(i).start)
                    .unwrap();
                pv.flat_mut()[flat_start] = vals[0];
            }
        }
        // zero the weights so the scale is exactly ln 2 everywhere
        let names: Vec<String> = pv.block_names().map(str::to_string).collect();
        for n in names {
            if n.ends_with(".w") {
                let i = pv.block_names().position(|bn| bn == n).unwrap();
                let r = pv.block_range(i);
                pv.flat_mut()[r].fill(0.0);
            }
        }
        let (_, ldj) = stack.forward_ldj::<f64>(pv.flat(), &[0.7], &[0.1, -0.2, 0.3]);
        assert!((ldj - 3.0 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn round_trips_are_exact_for_affine_and_tight_for_spline() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stack = spline_stack(2, 1);
        let pv = stack.init_params(&mut rng);
        use rand::Rng;
        for _ in 0..1000 {
            let y = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
            let ctx = [rng.gen_range(-1.0..1.0)];
            let u = stack.inverse::<f64>(pv.flat(), &ctx, &y);
            let back = stack.forward::<f64>(pv.flat(), &ctx, &u);
            for j in 0..2 {
                assert!((back[j] - y[j]).abs() < 1e-6, "spline stack round trip");
            }
        }
    }

    #[test]
    fn triangularity_perturbing_late_inputs_never_moves_early_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stack = spline_stack(3, 2);
        let pv = stack.init_params(&mut rng);
        use rand::Rng;
        for _ in 0..50 {
            let ctx = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let base = stack.forward::<f64>(pv.flat(), &ctx, &u);
            for j in 0..3 {
                let mut bumped = u.clone();
                bumped[j] += 0.37;
                let out = stack.forward::<f64>(pv.flat(), &ctx, &bumped);
                for k in 0..j {
                    assert_eq!(out[k], base[k], "output {k} moved when input {j} changed");
                }
            }
        }
    }

    #[test]
    fn monotone_in_own_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stack = spline_stack(2, 1);
        let pv = stack.init_params(&mut rng);
        use rand::Rng;
        for _ in 0..20 {
            let ctx = [rng.gen_range(-1.0..1.0)];
            let prefix = rng.gen_range(-2.0..2.0);
            for j in 0..2 {
                let mut prev = f64::NEG_INFINITY;
                for step in 0..60 {
                    let v = -6.0 + step as f64 * 0.2;
                    let u = if j == 0 { vec![v, 0.5] } else { vec![prefix, v] };
                    let out = stack.forward::<f64>(pv.flat(), &ctx, &u);
                    assert!(out[j] > prev, "coordinate {j} not increasing");
                    prev = out[j];
                }
            }
        }
    }

    #[test]
    fn mask_must_be_strictly_lower_triangular() {
        let mut mask = vec![vec![true; 1 + 2]; 2];
        mask[0][1 + 1] = true; // coordinate 0 reading outcome 1
        let spec = StackSpec {
            outcome_dim: 2,
            context_dim: 1,
            layers: vec![LayerSpec {
                kind: LayerKind::MaskedAffineAutoregressive,
                conditioner: ConditionerSpec::Linear,
                mask: Some(mask),
            }],
        };
        assert!(BijectorStack::new(spec).is_err());
    }

    #[test]
    fn mask_controls_which_inputs_reach_a_coordinate() {
        // coordinate 1 may read ctx but not outcome 0
        let mask = vec![vec![true, false, false], vec![true, false, false]];
        let spec = StackSpec {
            outcome_dim: 2,
            context_dim: 1,
            layers: vec![LayerSpec {
                kind: LayerKind::MaskedAffineAutoregressive,
                conditioner: ConditionerSpec::Linear,
                mask: Some(mask),
            }],
        };
        let stack = BijectorStack::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pv = stack.init_params(&mut rng);
        let out_a = stack.forward::<f64>(pv.flat(), &[0.5], &[0.0, 1.0]);
        let out_b = stack.forward::<f64>(pv.flat(), &[0.5], &[3.0, 1.0]);
        // masked: coordinate 1's bundle ignores input 0 entirely
        assert_eq!(out_a[1], out_b[1]);
    }
}
