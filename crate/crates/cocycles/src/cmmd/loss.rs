//! CMMD batch losses (V- and U-statistic forms) and the flow-SCM negative
//! log-likelihood.
//!
//! The transported batch is `t[i][j] = T[ctx_i, ctx_j](y_j)`. The V-form is
//!
//! ```text
//!   -(2/B²) Σ_{ij} k(y_i, t_ij) + (1/B³) Σ_{ijk} k(t_ij, t_ik)
//! ```
//!
//! and the U-form restricts to distinct indices with 1/(B(B-1)) and
//! 1/(B(B-1)(B-2)) weights. Training uses [`cmmd_minibatch_grad`], which
//! differentiates the kernel head by hand and seeds one reverse sweep through
//! the recorded transports; [`CmmdBatchLoss`] is the same loss written
//! entirely on the tape and exists to cross-check that path.

use serde::{Deserialize, Serialize};

use crate::bijectors::BijectorStack;
use crate::cmmd::kernel::KernelConfig;
use crate::error::{CocycleError, Result};
use crate::numerics::{ParameterVector, Scalar, ScalarLoss, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmmdVariant {
    V,
    U,
}

fn validate_batch(variant: CmmdVariant, b: usize) -> Result<()> {
    match variant {
        CmmdVariant::V if b >= 1 => Ok(()),
        CmmdVariant::U if b >= 3 => Ok(()),
        CmmdVariant::U => Err(CocycleError::Degenerate(format!(
            "U-statistic needs a batch of at least 3 distinct units, got {b}"
        ))),
        CmmdVariant::V => Err(CocycleError::Degenerate("empty batch".into())),
    }
}

/// The CMMD loss written entirely in [`Scalar`] arithmetic. Cubic in the
/// batch size with no shortcuts; intended for oracle checks on small batches
/// and for gradient cross-validation.
pub struct CmmdBatchLoss<'a> {
    pub stack: &'a BijectorStack,
    pub ctxs: &'a [Vec<f64>],
    pub ys: &'a [Vec<f64>],
    pub kernel: KernelConfig,
    pub variant: CmmdVariant,
}

impl ScalarLoss for CmmdBatchLoss<'_> {
    fn eval<S: Scalar>(&self, params: &[S]) -> S {
        let b = self.ys.len();
        validate_batch(self.variant, b).expect("invalid batch for CMMD variant");
        let lam = self.kernel.bandwidth;
        let lift = |v: f64| params[0].constant_like(v);
        // u_j then t_ij
        let us: Vec<Vec<S>> = (0..b)
            .map(|j| {
                let y: Vec<S> = self.ys[j].iter().map(|&v| lift(v)).collect();
                self.stack.inverse(params, &self.ctxs[j], &y)
            })
            .collect();
        let t: Vec<Vec<Vec<S>>> = (0..b)
            .map(|i| {
                (0..b)
                    .map(|j| self.stack.forward(params, &self.ctxs[i], &us[j]))
                    .collect()
            })
            .collect();
        let k_of = |a: &[S], c: &[S]| -> S {
            let mut d2 = (a[0] - c[0]) * (a[0] - c[0]);
            for d in 1..a.len() {
                d2 = d2 + (a[d] - c[d]) * (a[d] - c[d]);
            }
            (-(d2 * lam)).exp()
        };
        let k_data = |a: &[f64], c: &[S]| -> S {
            let mut d2 = c[0].rsub(a[0]) * c[0].rsub(a[0]);
            for d in 1..c.len() {
                d2 = d2 + c[d].rsub(a[d]) * c[d].rsub(a[d]);
            }
            (-(d2 * lam)).exp()
        };
        let mut term1 = lift(0.0);
        let mut term2 = lift(0.0);
        match self.variant {
            CmmdVariant::V => {
                for i in 0..b {
                    for j in 0..b {
                        term1 = term1 + k_data(&self.ys[i], &t[i][j]);
                        for k in 0..b {
                            term2 = term2 + k_of(&t[i][j], &t[i][k]);
                        }
                    }
                }
                let bf = b as f64;
                term1 * (-2.0 / (bf * bf)) + term2 / (bf * bf * bf)
            }
            CmmdVariant::U => {
                for i in 0..b {
                    for j in 0..b {
                        if j == i {
                            continue;
                        }
                        term1 = term1 + k_data(&self.ys[i], &t[i][j]);
                        for k in 0..b {
                            if k == i || k == j {
                                continue;
                            }
                            term2 = term2 + k_of(&t[i][j], &t[i][k]);
                        }
                    }
                }
                let bf = b as f64;
                term1 * (-2.0 / (bf * (bf - 1.0)))
                    + term2 / (bf * (bf - 1.0) * (bf - 2.0))
            }
        }
    }
}

/// Transported batch on plain values: `t[i][j] = T[ctx_i,ctx_j](y_j)`.
fn transported_f64(
    stack: &BijectorStack,
    params: &[f64],
    ctxs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let b = ys.len();
    let caches: Vec<_> = ctxs.iter().map(|c| stack.context_bundles::<f64>(params, c)).collect();
    let us: Vec<Vec<f64>> = (0..b)
        .map(|j| stack.inverse_cached::<f64>(params, &ctxs[j], &ys[j], &caches[j]))
        .collect();
    let mut t = Vec::with_capacity(b * b);
    for i in 0..b {
        for j in 0..b {
            t.push(stack.forward_cached::<f64>(params, &ctxs[i], &us[j], &caches[i]));
        }
    }
    t
}

/// Loss value only, on plain values, with the symmetric-pair shortcut.
pub fn cmmd_value(
    stack: &BijectorStack,
    params: &ParameterVector,
    ctxs: &[Vec<f64>],
    ys: &[Vec<f64>],
    kernel: &KernelConfig,
    variant: CmmdVariant,
) -> Result<f64> {
    validate_batch(variant, ys.len())?;
    let t = transported_f64(stack, params.flat(), ctxs, ys);
    let (value, _) = kernel_head(ctxs.len(), ys, &t, kernel, variant, false);
    Ok(value)
}

/// Loss value and gradient for one minibatch.
///
/// Records the `B` inverse and `B²` forward passes, differentiates the
/// kernel head analytically on plain values, and runs a single seeded
/// reverse sweep. `tape` is cleared and reused.
pub fn cmmd_minibatch_grad(
    tape: &Tape,
    stack: &BijectorStack,
    params: &ParameterVector,
    ctxs: &[Vec<f64>],
    ys: &[Vec<f64>],
    kernel: &KernelConfig,
    variant: CmmdVariant,
) -> Result<(f64, ParameterVector)> {
    let b = ys.len();
    validate_batch(variant, b)?;
    let p = stack.outcome_dim();
    tape.clear();
    let pvars: Vec<Var<'_>> = tape.inputs(params.flat());

    let caches: Vec<_> = ctxs.iter().map(|c| stack.context_bundles(&pvars, c)).collect();
    let us: Vec<Vec<Var<'_>>> = (0..b)
        .map(|j| {
            let y: Vec<Var<'_>> = ys[j].iter().map(|&v| tape.constant(v)).collect();
            stack.inverse_cached(&pvars, &ctxs[j], &y, &caches[j])
        })
        .collect();
    let mut t_vars: Vec<Option<Vec<Var<'_>>>> = Vec::with_capacity(b * b);
    let mut t_vals: Vec<Vec<f64>> = Vec::with_capacity(b * b);
    for i in 0..b {
        for j in 0..b {
            if variant == CmmdVariant::U && i == j {
                // the U-statistic never reads the diagonal
                t_vars.push(None);
                t_vals.push(vec![0.0; p]);
                continue;
            }
            let t = stack.forward_cached(&pvars, &ctxs[i], &us[j], &caches[i]);
            t_vals.push(t.iter().map(|v| v.value()).collect());
            t_vars.push(Some(t));
        }
    }

    let (value, seeds) = kernel_head(b, ys, &t_vals, kernel, variant, true);
    if !value.is_finite() {
        return Err(CocycleError::NonFiniteLoss {
            context: format!("CMMD batch of size {b}"),
        });
    }
    let seeds = seeds.expect("seeds requested");
    let mut seed_pairs: Vec<(Var<'_>, f64)> = Vec::with_capacity(b * b * p);
    for (cell, t) in t_vars.iter().enumerate() {
        if let Some(t) = t {
            for d in 0..p {
                let s = seeds[cell * p + d];
                if s != 0.0 {
                    seed_pairs.push((t[d], s));
                }
            }
        }
    }
    let adj = tape.adjoints_seeded(&seed_pairs);
    let grad = params.with_values(adj[..params.total_dim()].to_vec());
    if let Some(i) = grad.flat().iter().position(|g| !g.is_finite()) {
        return Err(CocycleError::NonFiniteGrad { block: grad.block_of(i).to_string() });
    }
    Ok((value, grad))
}

/// Evaluates the kernel head on transported values; optionally returns
/// ∂loss/∂t for every transported coordinate (flat `(i*b+j)*p + d` layout).
fn kernel_head(
    b: usize,
    ys: &[Vec<f64>],
    t: &[Vec<f64>],
    kernel: &KernelConfig,
    variant: CmmdVariant,
    want_seeds: bool,
) -> (f64, Option<Vec<f64>>) {
    let p = ys[0].len();
    let lam = kernel.bandwidth;
    let bf = b as f64;
    let (c1, c2) = match variant {
        CmmdVariant::V => (-2.0 / (bf * bf), 1.0 / (bf * bf * bf)),
        CmmdVariant::U => (
            -2.0 / (bf * (bf - 1.0)),
            1.0 / (bf * (bf - 1.0) * (bf - 2.0)),
        ),
    };
    let mut seeds = if want_seeds { vec![0.0f64; b * b * p] } else { Vec::new() };
    let mut term1 = 0.0;
    let mut term2 = 0.0;
    let cell = |i: usize, j: usize| (i * b + j) * p;

    for i in 0..b {
        for j in 0..b {
            if variant == CmmdVariant::U && j == i {
                continue;
            }
            let tij = &t[i * b + j];
            let mut d2 = 0.0;
            for d in 0..p {
                let diff = ys[i][d] - tij[d];
                d2 += diff * diff;
            }
            let w = (-lam * d2).exp();
            term1 += w;
            if want_seeds {
                let g = c1 * 2.0 * lam * w;
                for d in 0..p {
                    seeds[cell(i, j) + d] += g * (ys[i][d] - tij[d]);
                }
            }
        }
        // symmetric half-loop over (j, k); diagonal j == k contributes
        // B·1 to the V second term and nothing to its gradient
        for j in 0..b {
            if variant == CmmdVariant::U && j == i {
                continue;
            }
            let tij = &t[i * b + j];
            for k in (j + 1)..b {
                if variant == CmmdVariant::U && k == i {
                    continue;
                }
                let tik = &t[i * b + k];
                let mut d2 = 0.0;
                for d in 0..p {
                    let diff = tij[d] - tik[d];
                    d2 += diff * diff;
                }
                let w = (-lam * d2).exp();
                term2 += 2.0 * w;
                if want_seeds {
                    let g = c2 * 2.0 * 2.0 * lam * w;
                    for d in 0..p {
                        let diff = tij[d] - tik[d];
                        seeds[cell(i, j) + d] -= g * diff;
                        seeds[cell(i, k) + d] += g * diff;
                    }
                }
            }
            if variant == CmmdVariant::V {
                term2 += 1.0; // k(t_ij, t_ij)
            }
        }
    }
    (c1 * term1 + c2 * term2, want_seeds.then_some(seeds))
}

/// Flow-SCM negative log-likelihood over a batch, on any scalar kind.
///
/// `params` is the concatenation of stack parameters and base-distribution
/// parameters, in that order.
pub struct NllBatchLoss<'a> {
    pub stack: &'a BijectorStack,
    pub base: &'a crate::cmmd::base::BaseDistribution,
    pub ctxs: &'a [Vec<f64>],
    pub ys: &'a [Vec<f64>],
}

impl ScalarLoss for NllBatchLoss<'_> {
    fn eval<S: Scalar>(&self, params: &[S]) -> S {
        let n_stack = self.stack.param_count();
        let (stack_params, base_params) = params.split_at(n_stack);
        let mut total = params[0].constant_like(0.0);
        for (ctx, y) in self.ctxs.iter().zip(self.ys) {
            let y_s: Vec<S> = y.iter().map(|&v| params[0].constant_like(v)).collect();
            let (u, fwd_ldj) = self.stack.inverse_ldj(stack_params, ctx, &y_s);
            // log p(y) = log p_base(u) - log|det J_fwd|(u)
            total = total - self.base.log_pdf(base_params, &u) + fwd_ldj;
        }
        total / self.ys.len() as f64
    }
}
