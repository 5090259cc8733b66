//! Gradient entry points: one backward sweep, and the central-difference
//! oracle used to check it.

use crate::error::{CocycleError, Result};
use crate::numerics::params::ParameterVector;
use crate::numerics::tape::{Scalar, Tape, Var};

/// A scalar loss evaluable at any [`Scalar`] instantiation.
///
/// Written once, a loss runs as a plain `f64` forward pass or as a taped pass
/// that supports one reverse sweep. `params` is the flat view of a
/// [`ParameterVector`].
pub trait ScalarLoss {
    fn eval<S: Scalar>(&self, params: &[S]) -> S;
}

/// Reverse-mode gradient of `loss` at `at`; same block structure as `at`.
pub fn grad_of<L: ScalarLoss>(loss: &L, at: &ParameterVector) -> Result<ParameterVector> {
    at.check_finite()?;
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = tape.inputs(at.flat());
    let out = loss.eval::<Var<'_>>(&vars);
    if !out.value().is_finite() {
        return Err(CocycleError::NonFiniteLoss {
            context: format!("forward value {} after {} recorded ops", out.value(), tape.len()),
        });
    }
    let adj = tape.adjoints(out);
    let grad = at.with_values(adj[..at.total_dim()].to_vec());
    if let Some(i) = grad.flat().iter().position(|g| !g.is_finite()) {
        return Err(CocycleError::NonFiniteGrad {
            block: grad.block_of(i).to_string(),
        });
    }
    Ok(grad)
}

/// Loss value via the plain `f64` instantiation.
pub fn value_of<L: ScalarLoss>(loss: &L, at: &ParameterVector) -> f64 {
    loss.eval::<f64>(at.flat())
}

/// Central finite differences with the given step; the independent oracle for
/// [`grad_of`]. Takes any plain `f64` evaluation of the loss.
pub fn finite_diff_grad(
    loss: impl Fn(&[f64]) -> f64,
    at: &ParameterVector,
    step: f64,
) -> Result<ParameterVector> {
    if step <= 0.0 {
        return Err(CocycleError::InvalidConfig("finite-difference step must be > 0".into()));
    }
    let mut flat = at.flat().to_vec();
    let mut grad = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + step;
        let up = loss(&flat);
        flat[i] = orig - step;
        let down = loss(&flat);
        flat[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    Ok(at.with_values(grad))
}

/// [`finite_diff_grad`] applied to a [`ScalarLoss`].
pub fn finite_diff_grad_of<L: ScalarLoss>(
    loss: &L,
    at: &ParameterVector,
    step: f64,
) -> Result<ParameterVector> {
    finite_diff_grad(|p| loss.eval::<f64>(p), at, step)
}

/// Largest relative disagreement between two gradients, with |·| ≤ 1 floors
/// so zero coordinates compare absolutely.
pub fn max_rel_err(a: &ParameterVector, b: &ParameterVector) -> f64 {
    a.flat()
        .iter()
        .zip(b.flat())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Square;
    impl ScalarLoss for Square {
        fn eval<S: Scalar>(&self, params: &[S]) -> S {
            params[0] * params[0]
        }
    }

    struct ExpProduct;
    impl ScalarLoss for ExpProduct {
        fn eval<S: Scalar>(&self, params: &[S]) -> S {
            (params[0] * params[1]).exp()
        }
    }

    fn theta(vals: &[f64]) -> ParameterVector {
        let mut p = ParameterVector::new();
        p.push_block("theta", vals);
        p
    }

    #[test]
    fn square_has_gradient_two_theta() {
        let at = theta(&[3.0]);
        let g = grad_of(&Square, &at).unwrap();
        assert!((g.flat()[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        struct Const;
        impl ScalarLoss for Const {
            fn eval<S: Scalar>(&self, params: &[S]) -> S {
                params[0].constant_like(4.25)
            }
        }
        let g = grad_of(&Const, &theta(&[1.0, -2.0, 0.5])).unwrap();
        assert_eq!(g.flat(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn exp_product_matches_finite_differences() {
        let at = theta(&[1.0, 2.0]);
        let g = grad_of(&ExpProduct, &at).unwrap();
        let fd = finite_diff_grad_of(&ExpProduct, &at, 1e-5).unwrap();
        // analytic: (2e², e²) ≈ (14.778, 7.389)
        assert!((g.flat()[0] - 14.7781121978613).abs() < 1e-9);
        assert!((g.flat()[1] - 7.38905609893065).abs() < 1e-9);
        assert!(max_rel_err(&g, &fd) < 1e-8);
    }

    #[test]
    fn fd_of_abs_at_zero_is_zero() {
        let fd = finite_diff_grad(|p| p[0].abs(), &theta(&[0.0]), 1e-5).unwrap();
        assert_eq!(fd.flat()[0], 0.0);
    }

    #[test]
    fn fd_of_square_is_accurate() {
        let fd = finite_diff_grad_of(&Square, &theta(&[3.0]), 1e-5).unwrap();
        assert!((fd.flat()[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_is_linear_in_the_loss() {
        // grad(f+g) = grad f + grad g on random points
        struct SumLoss;
        impl ScalarLoss for SumLoss {
            fn eval<S: Scalar>(&self, p: &[S]) -> S {
                p[0] * p[0] + (p[0] * p[1]).exp()
            }
        }
        for seed in 0..10 {
            let x = 0.1 + 0.17 * seed as f64;
            let at = theta(&[x, 0.5 - 0.06 * seed as f64]);
            let g_sum = grad_of(&SumLoss, &at).unwrap();
            let g_a = grad_of(&Square, &at).unwrap();
            let g_b = grad_of(&ExpProduct, &at).unwrap();
            for i in 0..2 {
                let lhs = g_sum.flat()[i];
                let rhs = g_a.flat()[i] + g_b.flat()[i];
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_finite_loss_is_reported() {
        struct Bad;
        impl ScalarLoss for Bad {
            fn eval<S: Scalar>(&self, p: &[S]) -> S {
                p[0].ln()
            }
        }
        assert!(matches!(
            grad_of(&Bad, &theta(&[-1.0])),
            Err(CocycleError::NonFiniteLoss { .. }) | Err(CocycleError::NonFiniteGrad { .. })
        ));
    }
}
