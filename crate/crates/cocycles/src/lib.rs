//! Coherent counterfactual transports.
//!
//! This crate models couplings between counterfactual outcome distributions
//! with cocycles: families of transport maps `T[x,x'] = f_x ∘ f_{x'}⁻¹` built
//! from triangular monotone increasing (TMI) bijector stacks, so the identity
//! and path-independence laws hold by construction. Models are fitted with a
//! kernel two-sample loss (CMMD) that never references a latent noise
//! distribution, and compared against maximum-likelihood flow baselines and
//! optimal-transport constructions on seeded synthetic designs.

pub mod benchgen;
pub mod bijectors;
pub mod causal;
pub mod cmmd;
pub mod cocycle;
pub mod data;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod ot;

pub use error::{CocycleError, Result};
