//! Counterfactual imputation through a fitted model and the downstream
//! estimands computed from the imputed panel.

use serde::{Deserialize, Serialize};

use crate::cocycle::CocycleModel;
use crate::data::Dataset;
use crate::error::{CocycleError, Result};

/// Treatment level to impute: either a fixed level for every unit or a shift
/// of each unit's observed treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Target {
    Level { x: Vec<f64> },
    Shift { delta: Vec<f64> },
}

impl Target {
    pub fn level(x: f64) -> Self {
        Target::Level { x: vec![x] }
    }

    pub fn shift(d: f64) -> Self {
        Target::Shift { delta: vec![d] }
    }

    fn resolve(&self, observed_x: &[f64]) -> Vec<f64> {
        match self {
            Target::Level { x } => x.clone(),
            Target::Shift { delta } => {
                observed_x.iter().zip(delta).map(|(a, d)| a + d).collect()
            }
        }
    }
}

/// Observed rows plus imputed counterfactual outcomes at each target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImputedPanel {
    pub targets: Vec<Target>,
    /// `imputed[t][i]` is unit i's outcome vector at target t.
    pub imputed: Vec<Vec<Vec<f64>>>,
    pub observed_x: Vec<Vec<f64>>,
    pub observed_y: Vec<Vec<f64>>,
}

impl ImputedPanel {
    pub fn n(&self) -> usize {
        self.observed_y.len()
    }

    pub fn at(&self, target: usize) -> &[Vec<f64>] {
        &self.imputed[target]
    }
}

/// Imputes every unit's counterfactual outcome at each target level:
/// `ŷ_i(x*) = T[(x*, z_i), (x_i, z_i)](y_i)`.
pub fn impute(model: &CocycleModel, data: &Dataset, targets: &[Target]) -> Result<ImputedPanel> {
    let mut imputed = Vec::with_capacity(targets.len());
    for t in targets {
        let mut rows = Vec::with_capacity(data.n());
        for i in 0..data.n() {
            let x_star = t.resolve(&data.x[i]);
            if x_star.iter().any(|v| !v.is_finite()) {
                return Err(CocycleError::Degenerate("non-finite target level".into()));
            }
            let ctx_to = data.context_at(i, &x_star);
            let ctx_from = data.context(i);
            rows.push(model.transport(&ctx_to, &ctx_from, &data.y[i])?);
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

/// Per-unit effects `ŷ_i(a) − ŷ_i(b)` between two imputed targets.
pub fn effects(panel: &ImputedPanel, a: usize, b: usize) -> Vec<Vec<f64>> {
    panel.imputed[a]
        .iter()
        .zip(&panel.imputed[b])
        .map(|(ya, yb)| ya.iter().zip(yb).map(|(p, q)| p - q).collect())
        .collect()
}

/// Average effect between two imputed targets, per outcome coordinate.
pub fn ate(panel: &ImputedPanel, a: usize, b: usize) -> Vec<f64> {
    let diffs = effects(panel, a, b);
    let n = diffs.len() as f64;
    let p = diffs[0].len();
    let mut mean = vec![0.0; p];
    for d in &diffs {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v / n;
        }
    }
    mean
}

/// Treatment harm rate: the fraction of units whose outcome at target `a` is
/// ≤ the outcome at target `b` in SOME coordinate.
pub fn thr(panel: &ImputedPanel, a: usize, b: usize) -> f64 {
    let n = panel.n() as f64;
    panel.imputed[a]
        .iter()
        .zip(&panel.imputed[b])
        .filter(|(ya, yb)| ya.iter().zip(yb.iter()).any(|(p, q)| p <= q))
        .count() as f64
        / n
}

/// Fraction of units strictly better at `a` than at `b` in every coordinate.
/// Complements [`thr`]: the two always sum to one.
pub fn strict_dominance(panel: &ImputedPanel, a: usize, b: usize) -> f64 {
    let n = panel.n() as f64;
    panel.imputed[a]
        .iter()
        .zip(&panel.imputed[b])
        .filter(|(ya, yb)| ya.iter().zip(yb.iter()).all(|(p, q)| p > q))
        .count() as f64
        / n
}

/// Gaussian kernel density over scalar effect samples.
pub struct EffectDensity {
    pub samples: Vec<f64>,
    pub bandwidth: f64,
}

impl EffectDensity {
    /// Silverman's rule on the sample when no bandwidth is given.
    pub fn new(effects: &[f64], bandwidth: Option<f64>) -> Result<Self> {
        if effects.len() < 2 {
            return Err(CocycleError::Degenerate("density needs at least two effects".into()));
        }
        let bw = match bandwidth {
            Some(b) if b > 0.0 => b,
            Some(b) => {
                return Err(CocycleError::InvalidConfig(format!("bandwidth must be > 0, got {b}")))
            }
            None => silverman(effects),
        };
        Ok(EffectDensity { samples: effects.to_vec(), bandwidth: bw })
    }

    pub fn eval(&self, y: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h);
        let n = self.samples.len() as f64;
        self.samples
            .iter()
            .map(|&t| {
                let z = (t - y) / h;
                norm * (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            / n
    }

    pub fn eval_grid(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&g| self.eval(g)).collect()
    }
}

pub fn silverman(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let idx = (p * (sorted.len() - 1) as f64).round() as usize;
        sorted[idx]
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(1e-12)
}

/// Nadaraya–Watson estimate of `E[v | w = query]` with gaussian weights.
pub fn nw_conditional(values: &[f64], conditioning: &[f64], query: f64, bandwidth: f64) -> Result<f64> {
    let weights = nw_weights(conditioning, query, bandwidth)?;
    Ok(values.iter().zip(&weights).map(|(v, w)| v * w).sum())
}

/// Normalized gaussian weights at the query point. Errors when every weight
/// underflows to zero (the query sits outside the data range).
pub fn nw_weights(conditioning: &[f64], query: f64, bandwidth: f64) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0) {
        return Err(CocycleError::InvalidConfig("bandwidth must be > 0".into()));
    }
    let raw: Vec<f64> = conditioning
        .iter()
        .map(|&w| {
            let z = (query - w) / bandwidth;
            (-0.5 * z * z).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(CocycleError::Degenerate(format!(
            "all smoothing weights vanish at query {query}"
        )));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Weighted empirical quantile with Nadaraya–Watson weights:
/// `inf {t : Σ_i ŵ_i(v) 1{τ_i ≤ t} ≥ q}`.
pub fn conditional_quantile(
    effects: &[f64],
    conditioning: &[f64],
    query: f64,
    q: f64,
    bandwidth: f64,
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(CocycleError::InvalidConfig(format!("quantile level must be in (0,1), got {q}")));
    }
    let weights = nw_weights(conditioning, query, bandwidth)?;
    let mut order: Vec<usize> = (0..effects.len()).collect();
    order.sort_by(|&i, &j| effects[i].total_cmp(&effects[j]));
    let mut cum = 0.0;
    for &i in &order {
        cum += weights[i];
        if cum >= q - 1e-12 {
            return Ok(effects[i]);
        }
    }
    Ok(effects[order[order.len() - 1]])
}

/// Bandwidth for conditional estimands by 5-fold cross-validation: minimize
/// squared error predicting the indicators `1{τ ≤ t_j}` from `v` over a
/// 100-threshold grid of equispaced effect quantiles.
pub fn nw_bandwidth_cv(effects: &[f64], conditioning: &[f64], seed: u64) -> Result<f64> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let n = effects.len();
    if n < 10 {
        return Err(CocycleError::Degenerate("bandwidth CV needs at least 10 units".into()));
    }
    let mut sorted = effects.to_vec();
    sorted.sort_by(f64::total_cmp);
    let thresholds: Vec<f64> = (0..100)
        .map(|j| sorted[((j as f64 + 0.5) / 100.0 * (n - 1) as f64).round() as usize])
        .collect();

    // candidate grid around the conditioning scale
    let sd = silverman(conditioning).max(1e-6);
    let candidates: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|m| m * sd).collect();

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let folds = 5;
    let mut best = (f64::INFINITY, candidates[0]);
    for &h in &candidates {
        let mut sse = 0.0;
        let mut count = 0usize;
        for k in 0..folds {
            let val: Vec<usize> = idx.iter().copied().skip(k).step_by(folds).collect();
            let train: Vec<usize> =
                idx.iter().copied().filter(|i| !val.contains(i)).collect();
            let train_v: Vec<f64> = train.iter().map(|&i| conditioning[i]).collect();
            for &i in &val {
                let w = match nw_weights(&train_v, conditioning[i], h) {
                    Ok(w) => w,
                    Err(_) => continue,
                };
                for &t in &thresholds {
                    let pred: f64 = train
                        .iter()
                        .zip(&w)
                        .map(|(&j, wj)| wj * f64::from(effects[j] <= t))
                        .sum();
                    let truth = f64::from(effects[i] <= t);
                    sse += (pred - truth) * (pred - truth);
                    count += 1;
                }
            }
        }
        let mse = sse / count.max(1) as f64;
        if mse < best.0 {
            best = (mse, h);
        }
    }
    Ok(best.1)
}
