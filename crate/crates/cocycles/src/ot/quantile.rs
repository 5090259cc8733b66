//! One-dimensional quantile transport: `Q_target(F_source(y))` with the
//! midpoint empirical CDF and linearly interpolated quantiles.

use crate::error::{CocycleError, Result};

#[derive(Debug, Clone)]
pub struct QuantileMap1d {
    source: Vec<f64>,
    target: Vec<f64>,
}

impl QuantileMap1d {
    pub fn fit(source: &[f64], target: &[f64]) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(CocycleError::Degenerate("quantile map needs nonempty samples".into()));
        }
        let mut source = source.to_vec();
        let mut target = target.to_vec();
        source.sort_by(f64::total_cmp);
        target.sort_by(f64::total_cmp);
        Ok(QuantileMap1d { source, target })
    }

    /// Midpoint empirical CDF, linear between order statistics, clamped to
    /// [1/(2n), 1 - 1/(2n)].
    fn cdf(sorted: &[f64], y: f64) -> f64 {
        let n = sorted.len();
        let p = |i: usize| (i as f64 + 0.5) / n as f64;
        if y <= sorted[0] {
            return p(0);
        }
        if y >= sorted[n - 1] {
            return p(n - 1);
        }
        // last index with value <= y
        let hi = sorted.partition_point(|v| *v <= y);
        let (i, j) = (hi - 1, hi);
        let (a, b) = (sorted[i], sorted[j]);
        if b > a {
            p(i) + (p(j) - p(i)) * (y - a) / (b - a)
        } else {
            p(i)
        }
    }

    fn quantile(sorted: &[f64], p: f64) -> f64 {
        let n = sorted.len();
        let grid = |i: usize| (i as f64 + 0.5) / n as f64;
        if p <= grid(0) {
            return sorted[0];
        }
        if p >= grid(n - 1) {
            return sorted[n - 1];
        }
        let t = p * n as f64 - 0.5;
        let i = t.floor() as usize;
        let frac = t - i as f64;
        sorted[i] + (sorted[i + 1] - sorted[i]) * frac
    }

    pub fn map(&self, y: f64) -> f64 {
        Self::quantile(&self.target, Self::cdf(&self.source, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_samples_give_identity_at_sample_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let m = QuantileMap1d::fit(&xs, &xs).unwrap();
        for &x in &xs {
            assert!((m.map(x) - x).abs() < 1e-9, "{x}");
        }
        // and between sample points
        for i in 0..50 {
            let x = -2.5 + 0.1 * i as f64;
            assert!((m.map(x) - x).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_to_gaussian_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let src: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let tgt: Vec<f64> = (0..n)
            .map(|_| 1.0 + 2.0 * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let m = QuantileMap1d::fit(&src, &tgt).unwrap();
        // closed form: μ' + σ'Φ⁻¹(Φ(0)) = 1
        assert!((m.map(0.0) - 1.0).abs() < 0.1, "{}", m.map(0.0));
        assert!((m.map(1.0) - 3.0).abs() < 0.12, "{}", m.map(1.0));
    }

    #[test]
    fn map_is_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src: Vec<f64> = (0..500).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let tgt: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0f64..5.0).powi(2)).collect();
        let m = QuantileMap1d::fit(&src, &tgt).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let y = -3.0 + 6.0 * i as f64 / 400.0;
            let v = m.map(y);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn pushforward_matches_target_distribution() {
        use crate::harness::metrics::ks_distance_1d;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 2000;
        let src: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let tgt: Vec<f64> = (0..n)
            .map(|_| 0.5 + 1.5 * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let m = QuantileMap1d::fit(&src, &tgt).unwrap();
        let mapped: Vec<f64> = src.iter().map(|&y| m.map(y)).collect();
        let ks = ks_distance_1d(&mapped, &tgt);
        assert!(ks < 0.06, "ks={ks}");
    }
}
