//! Triangular monotone increasing bijector layers, their conditioners, and
//! stack composition.

pub mod conditioner;
pub mod layer;
pub mod spline;
pub mod stack;

pub use conditioner::{Activation, Conditioner, ConditionerSpec};
pub use layer::{Layer, LayerKind, LayerSpec};
pub use stack::{BijectorStack, StackSpec};
