//! Differentiation substrate: the operation tape, parameter vectors, the
//! Adam update, and the finite-difference oracle.

pub mod adam;
pub mod grad;
pub mod params;
pub mod tape;

pub use adam::{adam_step, AdamState};
pub use grad::{finite_diff_grad, finite_diff_grad_of, grad_of, max_rel_err, value_of, ScalarLoss};
pub use params::ParameterVector;
pub use tape::{Scalar, Tape, Var};
