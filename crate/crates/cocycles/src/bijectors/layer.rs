//! TMI bijector layers: each output coordinate depends only on input
//! coordinates up to its own index and is strictly increasing in that index,
//! for every context. Inverses are exact and computed coordinate-by-
//! coordinate in increasing order.

use serde::{Deserialize, Serialize};

use crate::bijectors::conditioner::{Conditioner, ConditionerSpec};
use crate::bijectors::spline;
use crate::error::{CocycleError, Result};
use crate::numerics::{ParameterVector, Scalar};

/// Log-scales are clamped here before exponentiation.
pub const LOG_SCALE_BOUND: f64 = 7.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerKind {
    Shift,
    TriangularAffine,
    MaskedAffineAutoregressive,
    RationalQuadraticSpline {
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_tail_bound")]
        tail_bound: f64,
    },
}

fn default_bins() -> usize {
    8
}
fn default_tail_bound() -> f64 {
    5.0
}

/// One layer of a bijector stack: a transform kind, its conditioner family,
/// and an optional adjacency mask over `(context, outcome)` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    pub conditioner: ConditionerSpec,
    /// Row j selects which of the `context ++ outcome` coordinates feed the
    /// conditioner of output coordinate j. Outcome-to-outcome entries must be
    /// strictly lower-triangular.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<Vec<bool>>>,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, conditioner: ConditionerSpec) -> Self {
        LayerSpec { kind, conditioner, mask: None }
    }
}

/// A layer instantiated for concrete dimensions, holding its conditioners and
/// the offsets of their parameter slices within the layer's parameter range.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    pub outcome_dim: usize,
    pub context_dim: usize,
    conditioners: Vec<Conditioner>,
    cond_offsets: Vec<usize>,
    param_count: usize,
    // per-conditioner selected (context, prefix) indices when a mask is set
    rows: Option<Vec<(Vec<usize>, Vec<usize>)>>,
}

/// Which context coordinates and which prefix coordinates feed coordinate
/// j's conditioner.
fn mask_row(spec: &LayerSpec, context_dim: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
    match &spec.mask {
        None => ((0..context_dim).collect(), (0..j).collect()),
        Some(rows) => {
            let row = &rows[j];
            let ctx = (0..context_dim).filter(|&c| row[c]).collect();
            let pre = (0..j).filter(|&k| row[context_dim + k]).collect();
            (ctx, pre)
        }
    }
}

impl Layer {
    pub fn new(spec: LayerSpec, outcome_dim: usize, context_dim: usize) -> Result<Self> {
        let p = outcome_dim;
        if let Some(rows) = &spec.mask {
            if rows.len() != p || rows.iter().any(|r| r.len() != context_dim + p) {
                return Err(CocycleError::ShapeMismatch(format!(
                    "adjacency mask must be {p} x {} for this layer",
                    context_dim + p
                )));
            }
            for (j, row) in rows.iter().enumerate() {
                for k in j..p {
                    if row[context_dim + k] {
                        return Err(CocycleError::InvalidConfig(format!(
                            "mask row {j} reads outcome {k}: outcome-to-outcome entries must be strictly lower-triangular"
                        )));
                    }
                }
            }
        }
        if let LayerKind::RationalQuadraticSpline { bins, tail_bound } = &spec.kind {
            if *bins < 1 {
                return Err(CocycleError::InvalidConfig("spline needs at least one bin".into()));
            }
            if !(*tail_bound > 0.0) {
                return Err(CocycleError::InvalidConfig("spline tail bound must be > 0".into()));
            }
        }

        let mut conditioners = Vec::new();
        match spec.kind {
            // conditioned on the context only; the input dependence is the
            // transform's own affine structure
            LayerKind::Shift => {
                let (ctx, _) = mask_row(&spec, context_dim, 0);
                conditioners.push(Conditioner::new(spec.conditioner.clone(), ctx.len(), 0, p));
            }
            LayerKind::TriangularAffine => {
                let (ctx, _) = mask_row(&spec, context_dim, 0);
                let bundle = 2 * p + p * (p - 1) / 2;
                conditioners.push(Conditioner::new(spec.conditioner.clone(), ctx.len(), 0, bundle));
            }
            LayerKind::MaskedAffineAutoregressive => {
                for j in 0..p {
                    let (ctx, pre) = mask_row(&spec, context_dim, j);
                    conditioners.push(Conditioner::new(
                        spec.conditioner.clone(),
                        ctx.len(),
                        pre.len(),
                        2,
                    ));
                }
            }
            LayerKind::RationalQuadraticSpline { bins, .. } => {
                for j in 0..p {
                    let (ctx, pre) = mask_row(&spec, context_dim, j);
                    conditioners.push(Conditioner::new(
                        spec.conditioner.clone(),
                        ctx.len(),
                        pre.len(),
                        spline::bundle_len(bins),
                    ));
                }
            }
        }
        let mut cond_offsets = Vec::with_capacity(conditioners.len() + 1);
        let mut total = 0;
        for c in &conditioners {
            cond_offsets.push(total);
            total += c.param_count();
        }
        cond_offsets.push(total);
        let rows = spec.mask.as_ref().map(|_| {
            (0..conditioners.len())
                .map(|j| mask_row(&spec, context_dim, j))
                .collect()
        });
        Ok(Layer {
            spec,
            outcome_dim,
            context_dim,
            conditioners,
            cond_offsets,
            param_count: total,
            rows,
        })
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    fn identity_bundle(&self, cond_index: usize) -> Vec<f64> {
        match &self.spec.kind {
            LayerKind::Shift => vec![0.0; self.outcome_dim],
            LayerKind::TriangularAffine => {
                vec![0.0; self.conditioners[cond_index].out_dim]
            }
            LayerKind::MaskedAffineAutoregressive => vec![0.0, 0.0],
            LayerKind::RationalQuadraticSpline { bins, .. } => {
                let mut raw = vec![0.0; 2 * bins];
                raw.extend(std::iter::repeat(spline::identity_derivative_raw()).take(bins - 1));
                raw
            }
        }
    }

    pub fn append_params(
        &self,
        prefix: &str,
        rng: &mut impl rand::Rng,
        pv: &mut ParameterVector,
    ) {
        for (i, c) in self.conditioners.iter().enumerate() {
            let name = if self.conditioners.len() == 1 {
                prefix.to_string()
            } else {
                format!("{prefix}.y{i}")
            };
            c.append_params(&name, &self.identity_bundle(i), rng, pv);
        }
    }

    fn bundle<S: Scalar>(
        &self,
        cond_index: usize,
        params: &[S],
        ctx: &[f64],
        prefix: &[S],
        out: &mut Vec<S>,
    ) {
        let c = &self.conditioners[cond_index];
        let slice = &params[self.cond_offsets[cond_index]..self.cond_offsets[cond_index + 1]];
        match &self.rows {
            None => c.eval(slice, ctx, prefix, out),
            Some(rows) => {
                let (ctx_idx, pre_idx) = &rows[cond_index];
                let ctx_buf: Vec<f64> = ctx_idx.iter().map(|&i| ctx[i]).collect();
                let pre_buf: Vec<S> = pre_idx.iter().map(|&k| prefix[k]).collect();
                c.eval(slice, &ctx_buf, &pre_buf, out);
            }
        }
    }

    /// Whether conditioner `i`'s bundle depends on the context alone (no
    /// autoregressive inputs), making it reusable across evaluations that
    /// share a context.
    pub fn context_only(&self, cond_index: usize) -> bool {
        self.conditioners[cond_index].state_dim == 0
    }

    pub fn num_conditioners(&self) -> usize {
        self.conditioners.len()
    }

    /// Bundles of every context-only conditioner in this layer.
    pub fn context_bundles<S: Scalar>(&self, params: &[S], ctx: &[f64]) -> Vec<Option<Vec<S>>> {
        (0..self.conditioners.len())
            .map(|i| {
                self.context_only(i).then(|| {
                    let mut out = Vec::new();
                    self.bundle(i, params, ctx, &[], &mut out);
                    out
                })
            })
            .collect()
    }

    fn bundle_or_cached<'c, S: Scalar>(
        &self,
        cond_index: usize,
        params: &[S],
        ctx: &[f64],
        prefix: &[S],
        cached: Option<&'c [Option<Vec<S>>]>,
        out: &mut Vec<S>,
    ) {
        if let Some(c) = cached.and_then(|c| c[cond_index].as_ref()) {
            out.clear();
            out.extend_from_slice(c);
        } else {
            self.bundle(cond_index, params, ctx, prefix, out);
        }
    }

    /// Forward image of `input`, with the log absolute determinant of the
    /// Jacobian (sum of log diagonal derivatives). `cached` carries
    /// precomputed context-only bundles from [`Layer::context_bundles`].
    pub fn forward_ldj_cached<S: Scalar>(
        &self,
        params: &[S],
        ctx: &[f64],
        input: &[S],
        cached: Option<&[Option<Vec<S>>]>,
    ) -> (Vec<S>, S) {
        let p = self.outcome_dim;
        let zero = input[0].constant_like(0.0);
        let mut ldj = zero;
        let mut out = Vec::with_capacity(p);
        let mut bundle = Vec::new();
        match &self.spec.kind {
            LayerKind::Shift => {
                self.bundle_or_cached(0, params, ctx, &[], cached, &mut bundle);
                for j in 0..p {
                    out.push(input[j] + bundle[j]);
                }
            }
            LayerKind::TriangularAffine => {
                self.bundle_or_cached(0, params, ctx, &[], cached, &mut bundle);
                let (diag, rest) = bundle.split_at(p);
                let (lower, bias) = rest.split_at(p * (p - 1) / 2);
                let mut off = 0;
                for j in 0..p {
                    let log_d = diag[j].clamp_val(-LOG_SCALE_BOUND, LOG_SCALE_BOUND);
                    let mut z = input[j] * log_d.exp() + bias[j];
                    if j > 0 {
                        z = z + S::dot(&lower[off..off + j], &input[..j]);
                    }
                    off += j;
                    ldj = ldj + log_d;
                    out.push(z);
                }
            }
            LayerKind::MaskedAffineAutoregressive => {
                for j in 0..p {
                    self.bundle_or_cached(j, params, ctx, &input[..j], cached, &mut bundle);
                    let s = bundle[0].clamp_val(-LOG_SCALE_BOUND, LOG_SCALE_BOUND);
                    out.push(input[j] * s.exp() + bundle[1]);
                    ldj = ldj + s;
                }
            }
            LayerKind::RationalQuadraticSpline { bins, tail_bound } => {
                for j in 0..p {
                    self.bundle_or_cached(j, params, ctx, &input[..j], cached, &mut bundle);
                    let knots = spline::decode(&bundle, *bins, *tail_bound);
                    let (y, l) = spline::forward(&knots, input[j], *tail_bound);
                    out.push(y);
                    ldj = ldj + l;
                }
            }
        }
        (out, ldj)
    }

    pub fn forward_ldj<S: Scalar>(&self, params: &[S], ctx: &[f64], input: &[S]) -> (Vec<S>, S) {
        self.forward_ldj_cached(params, ctx, input, None)
    }

    pub fn forward<S: Scalar>(&self, params: &[S], ctx: &[f64], input: &[S]) -> Vec<S> {
        self.forward_ldj(params, ctx, input).0
    }

    /// Exact inverse, solved coordinate-by-coordinate in increasing order,
    /// with the log absolute determinant of the *forward* Jacobian at the
    /// recovered point.
    pub fn inverse_ldj_cached<S: Scalar>(
        &self,
        params: &[S],
        ctx: &[f64],
        output: &[S],
        cached: Option<&[Option<Vec<S>>]>,
    ) -> (Vec<S>, S) {
        let p = self.outcome_dim;
        let zero = output[0].constant_like(0.0);
        let mut ldj = zero;
        let mut input: Vec<S> = Vec::with_capacity(p);
        let mut bundle = Vec::new();
        match &self.spec.kind {
            LayerKind::Shift => {
                self.bundle_or_cached(0, params, ctx, &[], cached, &mut bundle);
                for j in 0..p {
                    input.push(output[j] - bundle[j]);
                }
            }
            LayerKind::TriangularAffine => {
                self.bundle_or_cached(0, params, ctx, &[], cached, &mut bundle);
                let (diag, rest) = bundle.split_at(p);
                let (lower, bias) = rest.split_at(p * (p - 1) / 2);
                let mut off = 0;
                for j in 0..p {
                    let log_d = diag[j].clamp_val(-LOG_SCALE_BOUND, LOG_SCALE_BOUND);
                    let mut z = output[j] - bias[j];
                    if j > 0 {
                        z = z - S::dot(&lower[off..off + j], &input[..j]);
                    }
                    off += j;
                    input.push(z * (-log_d).exp());
                    ldj = ldj + log_d;
                }
            }
            LayerKind::MaskedAffineAutoregressive => {
                for j in 0..p {
                    self.bundle_or_cached(j, params, ctx, &input[..j], cached, &mut bundle);
                    let s = bundle[0].clamp_val(-LOG_SCALE_BOUND, LOG_SCALE_BOUND);
                    input.push((output[j] - bundle[1]) * (-s).exp());
                    ldj = ldj + s;
                }
            }
            LayerKind::RationalQuadraticSpline { bins, tail_bound } => {
                for j in 0..p {
                    self.bundle_or_cached(j, params, ctx, &input[..j], cached, &mut bundle);
                    let knots = spline::decode(&bundle, *bins, *tail_bound);
                    let (u, l) = spline::inverse(&knots, output[j], *tail_bound);
                    input.push(u);
                    ldj = ldj + l;
                }
            }
        }
        (input, ldj)
    }

    pub fn inverse_ldj<S: Scalar>(&self, params: &[S], ctx: &[f64], output: &[S]) -> (Vec<S>, S) {
        self.inverse_ldj_cached(params, ctx, output, None)
    }

    pub fn inverse<S: Scalar>(&self, params: &[S], ctx: &[f64], output: &[S]) -> Vec<S> {
        self.inverse_ldj(params, ctx, output).0
    }
}
