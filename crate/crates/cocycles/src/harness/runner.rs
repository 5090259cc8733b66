//! Runs an experiment config: per trial and method, generate data, fit,
//! impute, score against the ground truth, and persist results.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchgen::{generate, DesignSpec, GroundTruth};
use crate::causal::{impute, ImputedPanel, Target};
use crate::cmmd::{fit_candidate, kfold_select, SelectedModel};
use crate::cocycle::CocycleModel;
use crate::data::Dataset;
use crate::error::{CocycleError, Result};
use crate::harness::arch::{candidates, ConditionerFamily};
use crate::harness::config::{ExperimentConfig, Method};
use crate::harness::metrics::{ks_distance, rmse};
use crate::ot::{chain_nodes, EmpiricalOtMap, NodeSpec, QuantileMap1d, SeqOtModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub method: String,
    pub ks_int: Option<f64>,
    pub ks_cf: Option<f64>,
    pub cf_rmse: Option<f64>,
    pub ate_err: Option<f64>,
    pub selected: Option<String>,
    pub wall_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub ks_int_mean: Option<f64>,
    pub ks_int_sd: Option<f64>,
    pub ks_cf_mean: Option<f64>,
    pub ks_cf_sd: Option<f64>,
    pub cf_rmse_mean: Option<f64>,
    pub cf_rmse_sd: Option<f64>,
    pub ate_err_mean: Option<f64>,
    pub ate_err_sd: Option<f64>,
    pub selection_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<MethodAggregate>,
}

/// Conditioner family appropriate to a design's treatment support.
pub fn design_family(design: &DesignSpec) -> ConditionerFamily {
    match design {
        DesignSpec::Example1Mixed { .. } | DesignSpec::Example1Binary { .. } => {
            ConditionerFamily::Discrete { levels: 2 }
        }
        DesignSpec::Triangle { .. } => ConditionerFamily::Discrete { levels: 3 },
        _ => ConditionerFamily::Continuous,
    }
}

fn design_with_seed(design: &DesignSpec, seed: u64) -> DesignSpec {
    let mut d = design.clone();
    match &mut d {
        DesignSpec::Example1Mixed { seed: s, .. }
        | DesignSpec::Example1Binary { seed: s, .. }
        | DesignSpec::LinearAblation { seed: s, .. }
        | DesignSpec::Chain { seed: s, .. }
        | DesignSpec::Triangle { seed: s, .. }
        | DesignSpec::TwoVarLin { seed: s, .. }
        | DesignSpec::TwoVarNonlin { seed: s, .. }
        | DesignSpec::PlaneShift2d { seed: s, .. } => *s = seed,
    }
    d
}

/// Sequential-OT orderings: the chain keeps its DAG; other multivariate
/// designs use the dense ordering (treatment plus all earlier outcomes).
fn seqot_nodes(design: &DesignSpec, y_dim: usize) -> Vec<NodeSpec> {
    if matches!(design, DesignSpec::Chain { .. }) {
        return chain_nodes();
    }
    (0..y_dim)
        .map(|j| NodeSpec { treatment_parent: true, outcome_parents: (0..j).collect() })
        .collect()
}

/// Per-level samples for the empirical OT baseline; requires a discrete
/// treatment design.
fn level_groups(data: &Dataset, levels: usize) -> Result<Vec<Vec<usize>>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); levels];
    for i in 0..data.n() {
        let x = data.x[i][0];
        let l = x.round();
        if (x - l).abs() > 1e-9 || l < 0.0 || (l as usize) >= levels {
            return Err(CocycleError::InvalidConfig(
                "empirical OT requires discrete treatment levels".into(),
            ));
        }
        groups[l as usize].push(i);
    }
    Ok(groups)
}

fn impute_ot(data: &Dataset, targets: &[Target], levels: usize) -> Result<ImputedPanel> {
    let groups = level_groups(data, levels)?;
    let size = groups.iter().map(Vec::len).min().unwrap_or(0);
    if size == 0 {
        return Err(CocycleError::Degenerate("an OT level group is empty".into()));
    }
    let p = data.y_dim();
    // equal-size clouds: truncate each group to the smallest arm
    let clouds: Vec<Vec<Vec<f64>>> = groups
        .iter()
        .map(|g| g.iter().take(size).map(|&i| data.y[i].clone()).collect())
        .collect();
    // pairwise maps via 1-d quantiles or exact assignment
    enum PairMap {
        Quantile(QuantileMap1d),
        Assignment(EmpiricalOtMap),
    }
    let mut maps: Vec<Vec<Option<PairMap>>> = (0..levels).map(|_| Vec::new()).collect();
    for a in 0..levels {
        for b in 0..levels {
            maps[a].push(if a == b {
                None
            } else if p == 1 {
                let src: Vec<f64> = clouds[a].iter().map(|r| r[0]).collect();
                let tgt: Vec<f64> = clouds[b].iter().map(|r| r[0]).collect();
                Some(PairMap::Quantile(QuantileMap1d::fit(&src, &tgt)?))
            } else {
                Some(PairMap::Assignment(EmpiricalOtMap::fit(&clouds[a], &clouds[b])?))
            });
        }
    }
    let mut imputed = Vec::with_capacity(targets.len());
    for t in targets {
        let Target::Level { x } = t else {
            return Err(CocycleError::InvalidConfig(
                "empirical OT imputes at fixed levels only".into(),
            ));
        };
        let to = x[0].round() as usize;
        let mut rows = Vec::with_capacity(data.n());
        for i in 0..data.n() {
            let from = data.x[i][0].round() as usize;
            rows.push(match maps[from][to].as_ref() {
                None => data.y[i].clone(),
                Some(PairMap::Quantile(q)) => vec![q.map(data.y[i][0])],
                Some(PairMap::Assignment(a)) => a.map(&data.y[i]),
            });
        }
        imputed.push(rows);
    }
    Ok(ImputedPanel {
        targets: targets.to_vec(),
        imputed,
        observed_x: data.x.clone(),
        observed_y: data.y.clone(),
    })
}

fn impute_seqot(data: &Dataset, targets: &[Target], nodes: Vec<NodeSpec>) -> Result<ImputedPanel> {
    let model = SeqOtModel::fit(nodes, data)?;
    let mut imputed = Vec::with_capacity(targets.len());
    for t in targets {
        let mut rows = Vec::with_capacity(data.n());
        for i in 0..data.n() {
            let x_to = match t {
                Target::Level { x } => x.clone(),
                Target::Shift { delta } => {
                    data.x[i].iter().zip(delta).map(|(a, d)| a + d).collect()
                }
            };
            rows.push(model.transport(&data.x[i], &x_to, &data.y[i])?);
        }
        imputed.push(rows);
    }
    Ok(ImputedPanel {
        targets: targets.to_vec(),
        imputed,
        observed_x: data.x.clone(),
        observed_y: data.y.clone(),
    })
}

/// Fits one model-based method, honoring the hierarchy (singleton fits
/// directly, longer lists cross-validate).
pub fn fit_method(
    cfg: &ExperimentConfig,
    data: &Dataset,
    method: Method,
    seed: u64,
) -> Result<(CocycleModel, Option<String>)> {
    let loss = method.loss().expect("model-based method");
    let family = design_family(&cfg.design);
    let cands = candidates(&cfg.hierarchy, data.y_dim(), data.x_dim() + data.z_dim(), family)?;
    let mut cands = cands;
    if matches!(loss, crate::cmmd::LossSpec::Nll(_)) {
        for c in &mut cands {
            if c.id == "spline" {
                c.learning_rate = Some(0.001);
            }
        }
    }
    let train = crate::cmmd::TrainConfig { seed, ..cfg.train.clone() };
    if cands.len() == 1 {
        let m = fit_candidate(&cands[0], data, loss, &train, seed)?;
        let id = cands[0].id.clone();
        Ok((take_model(m), Some(id)))
    } else {
        let out = kfold_select(&cands, data, &cfg.cv, loss, &train)?;
        let selected = out.report.selected.clone();
        Ok((take_model(out.model), Some(selected)))
    }
}

fn take_model(m: SelectedModel) -> CocycleModel {
    match m {
        SelectedModel::Cocycle(c) => c,
        SelectedModel::Scm(s) => s.model,
    }
}

/// KS/RMSE/ATE scores of a panel against the design truth.
pub fn score_panel(
    panel: &ImputedPanel,
    truth: &GroundTruth,
    observed_y: &[Vec<f64>],
) -> Result<(f64, f64, f64, f64)> {
    let ks_int = ks_distance(&panel.imputed[0], &truth.counterfactuals[0]);
    let cf_rmse = rmse(&panel.imputed[0], &truth.counterfactuals[0])?;
    let (eff, true_eff): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if panel.targets.len() >= 2 {
        let e = crate::causal::effects(panel, 1, 0);
        let t = match &truth.effect_samples {
            Some(s) => s.clone(),
            None => truth.counterfactuals[1]
                .iter()
                .zip(&truth.counterfactuals[0])
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
                .collect(),
        };
        (e, t)
    } else {
        let e = observed_y
            .iter()
            .zip(&panel.imputed[0])
            .map(|(y, c)| y.iter().zip(c).map(|(a, b)| a - b).collect())
            .collect();
        let t = observed_y
            .iter()
            .zip(&truth.counterfactuals[0])
            .map(|(y, c)| y.iter().zip(c).map(|(a, b)| a - b).collect())
            .collect();
        (e, t)
    };
    let ks_cf = ks_distance(&eff, &true_eff);
    let p = eff[0].len();
    let mean = |rows: &Vec<Vec<f64>>| -> Vec<f64> {
        let mut m = vec![0.0; p];
        for r in rows {
            for (mi, v) in m.iter_mut().zip(r) {
                *mi += v / rows.len() as f64;
            }
        }
        m
    };
    let (ma, mb) = (mean(&eff), mean(&true_eff));
    let ate_err = ma
        .iter()
        .zip(&mb)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok((ks_int, ks_cf, cf_rmse, ate_err))
}

fn run_one(cfg: &ExperimentConfig, trial: usize, method: Method) -> TrialRow {
    let start = Instant::now();
    let trial_seed = cfg.seed_base + trial as u64;
    let mut row = TrialRow {
        trial,
        method: method.name().to_string(),
        ks_int: None,
        ks_cf: None,
        cf_rmse: None,
        ate_err: None,
        selected: None,
        wall_s: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let (data, truth) = generate(&design_with_seed(&cfg.design, trial_seed))?;
        let method_seed = trial_seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(method as u64 + 1);
        let panel = match method {
            Method::Ot => {
                let levels = match design_family(&cfg.design) {
                    ConditionerFamily::Discrete { levels } => levels,
                    ConditionerFamily::Continuous => {
                        return Err(CocycleError::InvalidConfig(
                            "empirical OT requires discrete treatment levels".into(),
                        ))
                    }
                };
                impute_ot(&data, &truth.targets, levels)?
            }
            Method::SeqOt => {
                impute_seqot(&data, &truth.targets, seqot_nodes(&cfg.design, data.y_dim()))?
            }
            _ => {
                let (model, selected) = fit_method(cfg, &data, method, method_seed)?;
                row.selected = selected;
                impute(&model, &data, &truth.targets)?
            }
        };
        let (ks_int, ks_cf, cf_rmse, ate_err) = score_panel(&panel, &truth, &data.y)?;
        row.ks_int = Some(ks_int);
        row.ks_cf = Some(ks_cf);
        row.cf_rmse = Some(cf_rmse);
        row.ate_err = Some(ate_err);
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row.wall_s = start.elapsed().as_secs_f64();
    row
}

/// Runs every (trial, method) cell. Trials execute concurrently with
/// disjoint seeds; a method failure is recorded in its row and the run
/// continues. Deterministic given the seed base.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cells: Vec<(usize, Method)> = (0..cfg.trials)
        .flat_map(|t| cfg.methods.iter().map(move |&m| (t, m)))
        .collect();
    let mut rows: Vec<TrialRow> =
        cells.par_iter().map(|&(t, m)| run_one(cfg, t, m)).collect();
    rows.sort_by(|a, b| (a.trial, &a.method).cmp(&(b.trial, &b.method)));
    let aggregates = aggregate(cfg, &rows);
    Ok(ExperimentReport { rows, aggregates })
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn aggregate(cfg: &ExperimentConfig, rows: &[TrialRow]) -> Vec<MethodAggregate> {
    cfg.methods
        .iter()
        .map(|m| {
            let name = m.name().to_string();
            let ok: Vec<&TrialRow> =
                rows.iter().filter(|r| r.method == name && r.error.is_none()).collect();
            let failed = rows.iter().filter(|r| r.method == name && r.error.is_some()).count();
            let collect = |f: fn(&TrialRow) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            let (ks_int_mean, ks_int_sd) = mean_sd(&collect(|r| r.ks_int));
            let (ks_cf_mean, ks_cf_sd) = mean_sd(&collect(|r| r.ks_cf));
            let (cf_rmse_mean, cf_rmse_sd) = mean_sd(&collect(|r| r.cf_rmse));
            let (ate_err_mean, ate_err_sd) = mean_sd(&collect(|r| r.ate_err));
            let mut selection_counts = BTreeMap::new();
            for r in &ok {
                if let Some(s) = &r.selected {
                    *selection_counts.entry(s.clone()).or_insert(0) += 1;
                }
            }
            MethodAggregate {
                method: name,
                trials_ok: ok.len(),
                trials_failed: failed,
                ks_int_mean,
                ks_int_sd,
                ks_cf_mean,
                ks_cf_sd,
                cf_rmse_mean,
                cf_rmse_sd,
                ate_err_mean,
                ate_err_sd,
                selection_counts,
            }
        })
        .collect()
}

/// Writes the per-trial CSV and aggregate JSON into `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("trials.csv"))?;
    w.write_record([
        "trial", "method", "ks_int", "ks_cf", "cf_rmse", "ate_err", "selected", "wall_s",
        "error",
    ])?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &report.rows {
        w.write_record([
            r.trial.to_string(),
            r.method.clone(),
            fmt(r.ks_int),
            fmt(r.ks_cf),
            fmt(r.cf_rmse),
            fmt(r.ate_err),
            r.selected.clone().unwrap_or_default(),
            r.wall_s.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    std::fs::write(
        dir.join("aggregate.json"),
        serde_json::to_string_pretty(&report.aggregates)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmmd::{CvConfig, TrainConfig};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            design: DesignSpec::LinearAblation {
                law: crate::benchgen::AblationLaw::Gaussian,
                n: 120,
                seed: 0,
            },
            methods: vec![Method::CocycleU, Method::MlGaussian],
            hierarchy: vec!["linear".into()],
            train: TrainConfig {
                batch_size: Some(32),
                epochs: 20,
                learning_rate: 0.05,
                seed: 0,
            },
            cv: CvConfig { folds: 2 },
            trials: 2,
            seed_base: 5,
        }
    }

    #[test]
    fn report_has_one_row_per_trial_method_cell() {
        let report = run_experiment(&tiny_config()).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.aggregates.len(), 2);
        for r in &report.rows {
            assert!(r.error.is_none(), "{:?}", r.error);
            assert!(r.ks_int.is_some());
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let a = run_experiment(&tiny_config()).unwrap();
        let b = run_experiment(&tiny_config()).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.ks_int, rb.ks_int);
            assert_eq!(ra.cf_rmse, rb.cf_rmse);
            assert_eq!(ra.ate_err, rb.ate_err);
        }
    }

    #[test]
    fn aggregates_recompute_from_rows() {
        let report = run_experiment(&tiny_config()).unwrap();
        for agg in &report.aggregates {
            let vals: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.method == agg.method && r.error.is_none())
                .filter_map(|r| r.ks_int)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((agg.ks_int_mean.unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn ot_method_errors_on_continuous_designs_but_run_continues() {
        let mut cfg = tiny_config();
        cfg.methods = vec![Method::Ot, Method::SeqOt];
        cfg.trials = 1;
        let report = run_experiment(&cfg).unwrap();
        let ot_row = report.rows.iter().find(|r| r.method == "ot").unwrap();
        assert!(ot_row.error.is_some());
        let seq_row = report.rows.iter().find(|r| r.method == "seq-ot").unwrap();
        assert!(seq_row.error.is_none(), "{:?}", seq_row.error);
    }
}
