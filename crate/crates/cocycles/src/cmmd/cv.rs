//! Architecture selection by K-fold cross-validation over a hierarchy of
//! stacks of increasing expressivity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bijectors::StackSpec;
use crate::cmmd::base::FlowScm;
use crate::cmmd::kernel::{median_bandwidth, KernelConfig};
use crate::cmmd::loss::{cmmd_value, CmmdVariant, NllBatchLoss};
use crate::cmmd::train::{train_cocycle, train_scm, LossSpec, TrainConfig};
use crate::cocycle::CocycleModel;
use crate::data::Dataset;
use crate::error::{CocycleError, Result};
use crate::numerics::value_of;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { folds: 2 }
    }
}

/// A named stack in the hierarchy, ordered simplest-first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub spec: StackSpec,
    /// Candidate-specific learning rate (the spline stack trains slower
    /// under maximum likelihood).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
}

/// A fitted model of either objective family.
pub enum SelectedModel {
    Cocycle(CocycleModel),
    Scm(FlowScm),
}

impl SelectedModel {
    pub fn cocycle(&self) -> &CocycleModel {
        match self {
            SelectedModel::Cocycle(m) => m,
            SelectedModel::Scm(s) => &s.model,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub selected: String,
    /// Mean validation loss per candidate; None marks a failed fit.
    pub validation: Vec<(String, Option<f64>)>,
}

pub struct CvOutcome {
    pub report: CvReport,
    pub model: SelectedModel,
}

/// Algorithm: for each candidate architecture, train on each of K train
/// splits and score the held-out fold; select the arg-min of the mean
/// validation loss (ties to the earlier, simpler entry); refit the winner on
/// all data. Candidates that fail to train in any fold are excluded.
pub fn kfold_select(
    hierarchy: &[Candidate],
    data: &Dataset,
    cv: &CvConfig,
    loss: LossSpec,
    cfg: &TrainConfig,
) -> Result<CvOutcome> {
    if hierarchy.is_empty() {
        return Err(CocycleError::InvalidConfig("empty architecture hierarchy".into()));
    }
    if cv.folds < 2 {
        return Err(CocycleError::InvalidConfig("cross-validation needs K >= 2".into()));
    }
    if data.n() < cv.folds * 3 {
        return Err(CocycleError::Degenerate(format!(
            "{} rows cannot fill {} folds of at least 3",
            data.n(),
            cv.folds
        )));
    }

    // one deterministic permutation shared by every candidate
    let mut indices: Vec<usize> = (0..data.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    indices.shuffle(&mut rng);
    let folds: Vec<Vec<usize>> = chunk_folds(&indices, cv.folds);

    // fixed scoring kernel so validation values are comparable across folds
    let score_kernel = KernelConfig::new(median_bandwidth(&data.y)?)?;

    let tasks: Vec<(usize, usize)> = (0..hierarchy.len())
        .flat_map(|a| (0..cv.folds).map(move |k| (a, k)))
        .collect();
    let fold_losses: Vec<((usize, usize), Option<f64>)> = tasks
        .par_iter()
        .map(|&(a, k)| {
            let val_idx = &folds[k];
            let train_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            let train_data = data.subset(&train_idx);
            let val_data = data.subset(val_idx);
            let seed = derive_seed(cfg.seed, a, k);
            let score = fit_and_score(
                &hierarchy[a],
                &train_data,
                &val_data,
                loss,
                cfg,
                seed,
                &score_kernel,
            );
            ((a, k), score.ok())
        })
        .collect();

    let mut validation: Vec<(String, Option<f64>)> = Vec::with_capacity(hierarchy.len());
    for (a, cand) in hierarchy.iter().enumerate() {
        let per_fold: Vec<Option<f64>> = fold_losses
            .iter()
            .filter(|((ai, _), _)| *ai == a)
            .map(|(_, v)| *v)
            .collect();
        let mean = if per_fold.iter().all(|v| v.is_some_and(|x| x.is_finite())) {
            Some(per_fold.iter().map(|v| v.unwrap()).sum::<f64>() / per_fold.len() as f64)
        } else {
            None
        };
        validation.push((cand.id.clone(), mean));
    }

    // strict less-than keeps ties on the earlier (simpler) candidate
    let mut best: Option<(usize, f64)> = None;
    for (a, (_, v)) in validation.iter().enumerate() {
        if let Some(v) = v {
            if best.map_or(true, |(_, bv)| *v < bv) {
                best = Some((a, *v));
            }
        }
    }
    let (best_idx, _) = best.ok_or(CocycleError::AllArchitecturesFailed)?;

    let refit_seed = derive_seed(cfg.seed, best_idx, usize::MAX);
    let model = fit_candidate(&hierarchy[best_idx], data, loss, cfg, refit_seed)?;
    Ok(CvOutcome {
        report: CvReport { selected: hierarchy[best_idx].id.clone(), validation },
        model,
    })
}

fn chunk_folds(indices: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = indices.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(indices[at..at + len].to_vec());
        at += len;
    }
    folds
}

fn derive_seed(base: u64, arch: usize, fold: usize) -> u64 {
    base ^ (arch as u64).wrapping_mul(0x517c_c1b7_2722_0a95)
        ^ (fold as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)
}

/// Builds and trains one candidate directly on `data` (no selection).
pub fn fit_candidate(
    cand: &Candidate,
    data: &Dataset,
    loss: LossSpec,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<SelectedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = data.layout();
    let cfg = TrainConfig {
        seed,
        learning_rate: cand.learning_rate.unwrap_or(cfg.learning_rate),
        ..cfg.clone()
    };
    match loss {
        LossSpec::CmmdV | LossSpec::CmmdU => {
            let model = CocycleModel::new(cand.spec.clone(), layout, cand.id.clone(), &mut rng)?;
            let variant = if loss == LossSpec::CmmdV { CmmdVariant::V } else { CmmdVariant::U };
            Ok(SelectedModel::Cocycle(train_cocycle(model, data, variant, &cfg)?.model))
        }
        LossSpec::Nll(family) => {
            let scm = FlowScm::new(cand.spec.clone(), layout, cand.id.clone(), family, &mut rng)?;
            Ok(SelectedModel::Scm(train_scm(scm, data, &cfg)?.model))
        }
    }
}

fn fit_and_score(
    cand: &Candidate,
    train_data: &Dataset,
    val_data: &Dataset,
    loss: LossSpec,
    cfg: &TrainConfig,
    seed: u64,
    score_kernel: &KernelConfig,
) -> Result<f64> {
    let fitted = fit_candidate(cand, train_data, loss, cfg, seed)?;
    let val_ctxs: Vec<Vec<f64>> = (0..val_data.n()).map(|i| val_data.context(i)).collect();
    match &fitted {
        SelectedModel::Cocycle(m) => {
            // held-out CMMD-V: transports sourced from held-out contexts only
            cmmd_value(&m.stack, &m.params, &val_ctxs, &val_data.y, score_kernel, CmmdVariant::V)
        }
        SelectedModel::Scm(s) => {
            let nll = NllBatchLoss {
                stack: &s.model.stack,
                base: &s.base,
                ctxs: &val_ctxs,
                ys: &val_data.y,
            };
            let v = value_of(&nll, &s.model.params);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CocycleError::NonFiniteLoss { context: "validation NLL".into() })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bijectors::{ConditionerSpec, LayerKind, LayerSpec};
    use rand::Rng;

    fn linear_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let xi: f64 = rng.sample(rand_distr::StandardNormal);
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            x.push(vec![xi]);
            y.push(vec![xi + e]);
        }
        Dataset::new(Vec::new(), x, y).unwrap()
    }

    fn linear_candidate() -> Candidate {
        Candidate {
            id: "linear".into(),
            spec: StackSpec {
                outcome_dim: 1,
                context_dim: 1,
                layers: vec![LayerSpec::new(LayerKind::Shift, ConditionerSpec::Linear)],
            },
            learning_rate: None,
        }
    }

    #[test]
    fn singleton_hierarchy_selects_it() {
        let data = linear_data(60, 1);
        let cfg = TrainConfig { batch_size: Some(20), epochs: 5, learning_rate: 0.05, seed: 0 };
        let out = kfold_select(
            &[linear_candidate()],
            &data,
            &CvConfig { folds: 2 },
            LossSpec::CmmdV,
            &cfg,
        )
        .unwrap();
        assert_eq!(out.report.selected, "linear");
        assert!(out.report.validation[0].1.is_some());
    }

    #[test]
    fn selected_model_has_minimal_validation_loss() {
        let data = linear_data(90, 5);
        let cfg = TrainConfig { batch_size: Some(16), epochs: 8, learning_rate: 0.05, seed: 3 };
        let wide = Candidate {
            id: "masked-affine".into(),
            learning_rate: None,
            spec: StackSpec {
                outcome_dim: 1,
                context_dim: 1,
                layers: vec![LayerSpec::new(
                    LayerKind::MaskedAffineAutoregressive,
                    ConditionerSpec::Mlp {
                        layers: 2,
                        width: 8,
                        activation: crate::bijectors::Activation::Tanh,
                    },
                )],
            },
        };
        let out = kfold_select(
            &[linear_candidate(), wide],
            &data,
            &CvConfig { folds: 3 },
            LossSpec::CmmdU,
            &cfg,
        )
        .unwrap();
        let selected_loss = out
            .report
            .validation
            .iter()
            .find(|(id, _)| *id == out.report.selected)
            .and_then(|(_, v)| *v)
            .unwrap();
        for (_, v) in &out.report.validation {
            if let Some(v) = v {
                assert!(selected_loss <= *v);
            }
        }
    }

    #[test]
    fn needs_enough_rows_per_fold() {
        let data = linear_data(5, 2);
        let cfg = TrainConfig::default();
        let r = kfold_select(
            &[linear_candidate()],
            &data,
            &CvConfig { folds: 2 },
            LossSpec::CmmdV,
            &cfg,
        );
        assert!(r.is_err());
    }
}
