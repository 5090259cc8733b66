//! Seeded noise laws and synthetic designs with ground-truth counterfactuals.

pub mod designs;
pub mod noise;

pub use designs::{generate, triangle_matrix, AblationLaw, DesignSpec, GroundTruth, TrueTransport};
pub use noise::{sample_noise, NoiseLaw};
