//! Evaluation metrics: Kolmogorov–Smirnov distance (averaged across
//! coordinates for multivariate samples) and root-mean-square error.

use crate::error::{CocycleError, Result};

/// Two-sample KS statistic on scalars: the sup over pooled jump points of
/// the empirical CDF gap.
pub fn ks_distance_1d(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs nonempty samples");
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut sup = 0.0f64;
    while ia < sa.len() && ib < sb.len() {
        let v = sa[ia].min(sb[ib]);
        while ia < sa.len() && sa[ia] <= v {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= v {
            ib += 1;
        }
        sup = sup.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    sup
}

/// Marginal KS averaged over outcome coordinates.
pub fn ks_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs nonempty samples");
    let p = a[0].len();
    let mut total = 0.0;
    for d in 0..p {
        let ad: Vec<f64> = a.iter().map(|r| r[d]).collect();
        let bd: Vec<f64> = b.iter().map(|r| r[d]).collect();
        total += ks_distance_1d(&ad, &bd);
    }
    total / p as f64
}

/// √(mean squared Euclidean error) between paired rows.
pub fn rmse(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CocycleError::ShapeMismatch(format!(
            "rmse needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(CocycleError::Degenerate("rmse of empty samples".into()));
    }
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| crate::cmmd::kernel::sq_dist(x, y))
        .sum();
    Ok((total / a.len() as f64).sqrt())
}
