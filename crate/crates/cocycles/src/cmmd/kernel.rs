//! Gaussian kernel, the median-heuristic bandwidth, and Gram matrices.

use serde::{Deserialize, Serialize};

use crate::error::{CocycleError, Result};

/// Gaussian kernel `k(y,y') = exp(-λ ‖y-y'‖²)`; `k(y,y) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(CocycleError::InvalidConfig(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(KernelConfig { bandwidth })
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (-self.bandwidth * sq_dist(a, b)).exp()
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// λ = 1 / (2 m²) with m the median pairwise Euclidean distance of the
/// samples. Errors when every sample coincides (the bandwidth degenerates).
pub fn median_bandwidth(samples: &[Vec<f64>]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(CocycleError::Degenerate(
            "median heuristic needs at least two samples".into(),
        ));
    }
    let mut dists = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            dists.push(sq_dist(&samples[i], &samples[j]).sqrt());
        }
    }
    let m = median_in_place(&mut dists);
    if !(m > 0.0) {
        return Err(CocycleError::Degenerate(
            "all samples identical: median pairwise distance is zero".into(),
        ));
    }
    Ok(1.0 / (2.0 * m * m))
}

/// Median with the even-count average-of-middle-two convention.
fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let (_, mid, _) = values.select_nth_unstable_by(n / 2, f64::total_cmp);
    let hi = *mid;
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..n / 2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// `K[i][j] = k(a_i, b_j)`.
pub fn kernel_matrix(a: &[Vec<f64>], b: &[Vec<f64>], cfg: &KernelConfig) -> Vec<Vec<f64>> {
    a.iter()
        .map(|ai| b.iter().map(|bj| cfg.eval(ai, bj)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(vals: &[f64]) -> Vec<Vec<f64>> {
        vals.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn median_bandwidth_enumeration_oracle() {
        // {0,1,3}: distances {1,2,3}, median 2 → λ = 1/8
        let lam = median_bandwidth(&col(&[0.0, 1.0, 3.0])).unwrap();
        assert!((lam - 0.125).abs() < 1e-12);
    }

    #[test]
    fn single_pair_bandwidth() {
        for c in [0.5, 1.0, 4.0] {
            let lam = median_bandwidth(&col(&[0.0, c])).unwrap();
            assert!((lam - 1.0 / (2.0 * c * c)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dim_hand_distance() {
        let lam = median_bandwidth(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert!((lam - 0.02).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_error() {
        assert!(median_bandwidth(&col(&[2.0, 2.0, 2.0])).is_err());
    }

    #[test]
    fn brute_force_median_agreement() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for n in [2usize, 3, 5, 8, 13] {
            let samples: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect();
            let mut dists = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    dists.push(sq_dist(&samples[i], &samples[j]).sqrt());
                }
            }
            dists.sort_by(f64::total_cmp);
            let k = dists.len();
            let med = if k % 2 == 1 {
                dists[k / 2]
            } else {
                0.5 * (dists[k / 2 - 1] + dists[k / 2])
            };
            let expect = 1.0 / (2.0 * med * med);
            let got = median_bandwidth(&samples).unwrap();
            assert!((got - expect).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn kernel_values() {
        let cfg = KernelConfig::new(0.5).unwrap();
        assert_eq!(cfg.eval(&[1.7], &[1.7]), 1.0);
        // λ=0.5, ‖a−b‖²=2 → e⁻¹
        let v = cfg.eval(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gram_matrix_two_by_two() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let pts = col(&[0.0, 1.0]);
        let k = kernel_matrix(&pts, &pts, &cfg);
        let e1 = (-1.0f64).exp();
        assert_eq!(k[0][0], 1.0);
        assert_eq!(k[1][1], 1.0);
        assert!((k[0][1] - e1).abs() < 1e-12);
        assert!((k[1][0] - e1).abs() < 1e-12);
        assert_eq!(k[0][1], k[1][0]);
    }
}
