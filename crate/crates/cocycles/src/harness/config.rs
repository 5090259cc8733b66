//! JSON experiment configuration shared by the CLI subcommands.

use serde::{Deserialize, Serialize};

use crate::benchgen::DesignSpec;
use crate::cmmd::{BaseFamily, CvConfig, LossSpec, TrainConfig};
use crate::error::{CocycleError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CocycleV,
    CocycleU,
    MlGaussian,
    MlLaplace,
    MlStudentT,
    Ot,
    SeqOt,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::CocycleV => "cocycle-v",
            Method::CocycleU => "cocycle-u",
            Method::MlGaussian => "ml-gaussian",
            Method::MlLaplace => "ml-laplace",
            Method::MlStudentT => "ml-student-t",
            Method::Ot => "ot",
            Method::SeqOt => "seq-ot",
        }
    }

    /// The training objective for model-based methods; None for the
    /// transport baselines that fit without gradient training.
    pub fn loss(&self) -> Option<LossSpec> {
        match self {
            Method::CocycleV => Some(LossSpec::CmmdV),
            Method::CocycleU => Some(LossSpec::CmmdU),
            Method::MlGaussian => Some(LossSpec::Nll(BaseFamily::Gaussian)),
            Method::MlLaplace => Some(LossSpec::Nll(BaseFamily::Laplace)),
            Method::MlStudentT => Some(LossSpec::Nll(BaseFamily::StudentT)),
            Method::Ot | Method::SeqOt => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub design: DesignSpec,
    pub methods: Vec<Method>,
    /// Architecture ids in increasing expressivity. A single entry is fitted
    /// directly; longer hierarchies go through K-fold selection.
    #[serde(default = "default_hierarchy")]
    pub hierarchy: Vec<String>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
}

fn default_hierarchy() -> Vec<String> {
    crate::harness::arch::DEFAULT_HIERARCHY.iter().map(|s| s.to_string()).collect()
}

fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(CocycleError::InvalidConfig("no methods requested".into()));
        }
        if self.hierarchy.is_empty() {
            return Err(CocycleError::InvalidConfig("empty hierarchy".into()));
        }
        if self.trials == 0 {
            return Err(CocycleError::InvalidConfig("trials must be >= 1".into()));
        }
        for id in &self.hierarchy {
            crate::harness::arch::architecture(id, 1, 1, crate::harness::arch::ConditionerFamily::Continuous)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let json = r#"{
            "design": {"name": "linear-ablation", "law": "cauchy", "n": 1000, "seed": 0},
            "methods": ["cocycle-u", "ml-gaussian"],
            "hierarchy": ["linear", "additive-mlp", "masked-affine", "spline"],
            "train": {"batch_size": 64, "epochs": 100, "learning_rate": 0.01, "seed": 0},
            "cv": {"folds": 2},
            "trials": 10,
            "seed_base": 7
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.trials, 10);
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.methods[0].name(), "cocycle-u");
    }

    #[test]
    fn defaults_fill_in() {
        let json = r#"{
            "design": {"name": "two-var-lin", "n": 100, "seed": 1},
            "methods": ["cocycle-v"]
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.hierarchy.len(), 4);
        assert_eq!(cfg.cv.folds, 2);
    }

    #[test]
    fn bad_architecture_rejected() {
        let json = r#"{
            "design": {"name": "two-var-lin", "n": 100, "seed": 1},
            "methods": ["cocycle-v"],
            "hierarchy": ["transformer"]
        }"#;
        assert!(ExperimentConfig::from_json(json).is_err());
    }
}
