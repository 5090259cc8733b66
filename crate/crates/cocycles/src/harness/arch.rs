//! Named stack architectures forming the cross-validation hierarchy.

use serde::{Deserialize, Serialize};

use crate::bijectors::{ConditionerSpec, LayerKind, LayerSpec, StackSpec};
use crate::cmmd::Candidate;
use crate::error::{CocycleError, Result};

/// How conditioners read the context: functions of a continuous context, or
/// a lookup over discrete treatment levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionerFamily {
    Continuous,
    Discrete { levels: usize },
}

impl ConditionerFamily {
    fn simple(&self) -> ConditionerSpec {
        match self {
            ConditionerFamily::Continuous => ConditionerSpec::Linear,
            ConditionerFamily::Discrete { levels } => {
                ConditionerSpec::ConstantTable { levels: *levels }
            }
        }
    }

    fn flexible(&self) -> ConditionerSpec {
        match self {
            ConditionerFamily::Continuous => ConditionerSpec::mlp(),
            ConditionerFamily::Discrete { levels } => {
                ConditionerSpec::ConstantTable { levels: *levels }
            }
        }
    }
}

/// Builds the stack for one architecture id.
///
/// Ids, simplest first: `linear` (conditioned shift), `additive-mlp` (shift
/// with an MLP conditioner), `triangular-affine`, `masked-affine` (one
/// autoregressive affine layer), `spline` (8-bin rational-quadratic spline
/// between two affine layers).
pub fn architecture(
    id: &str,
    outcome_dim: usize,
    context_dim: usize,
    family: ConditionerFamily,
) -> Result<StackSpec> {
    let layers = match id {
        "linear" => vec![LayerSpec::new(LayerKind::Shift, family.simple())],
        "additive-mlp" => vec![LayerSpec::new(
            LayerKind::Shift,
            match family {
                ConditionerFamily::Continuous => ConditionerSpec::mlp(),
                ConditionerFamily::Discrete { levels } => {
                    ConditionerSpec::ConstantTable { levels }
                }
            },
        )],
        "triangular-affine" => {
            vec![LayerSpec::new(LayerKind::TriangularAffine, family.flexible())]
        }
        "masked-affine" => vec![LayerSpec::new(
            LayerKind::MaskedAffineAutoregressive,
            family.flexible(),
        )],
        "spline" => vec![
            LayerSpec::new(LayerKind::MaskedAffineAutoregressive, family.flexible()),
            LayerSpec::new(
                LayerKind::RationalQuadraticSpline { bins: 8, tail_bound: 5.0 },
                family.flexible(),
            ),
            LayerSpec::new(LayerKind::MaskedAffineAutoregressive, family.flexible()),
        ],
        other => {
            return Err(CocycleError::InvalidConfig(format!(
                "unknown architecture id `{other}`"
            )))
        }
    };
    Ok(StackSpec { outcome_dim, context_dim, layers })
}

/// The default hierarchy in increasing expressivity.
pub const DEFAULT_HIERARCHY: [&str; 4] = ["linear", "additive-mlp", "masked-affine", "spline"];

pub fn candidates(
    ids: &[String],
    outcome_dim: usize,
    context_dim: usize,
    family: ConditionerFamily,
) -> Result<Vec<Candidate>> {
    ids.iter()
        .map(|id| {
            Ok(Candidate {
                id: id.clone(),
                spec: architecture(id, outcome_dim, context_dim, family)?,
                learning_rate: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijectors::BijectorStack;

    #[test]
    fn every_default_id_builds() {
        for id in DEFAULT_HIERARCHY {
            for family in
                [ConditionerFamily::Continuous, ConditionerFamily::Discrete { levels: 3 }]
            {
                let spec = architecture(id, 2, 1, family).unwrap();
                BijectorStack::new(spec).unwrap();
            }
        }
    }

    #[test]
    fn unknown_id_is_an_error() {
        assert!(architecture("resnet", 1, 1, ConditionerFamily::Continuous).is_err());
    }

    #[test]
    fn spline_is_sandwiched_between_affine_layers() {
        let spec = architecture("spline", 1, 1, ConditionerFamily::Continuous).unwrap();
        assert_eq!(spec.layers.len(), 3);
        assert!(matches!(spec.layers[0].kind, LayerKind::MaskedAffineAutoregressive));
        assert!(matches!(spec.layers[1].kind, LayerKind::RationalQuadraticSpline { bins: 8, .. }));
        assert!(matches!(spec.layers[2].kind, LayerKind::MaskedAffineAutoregressive));
    }
}
