//! Closed-form quadratic-cost transport between gaussians: the affine map
//! `y ↦ μ' + A (y − μ)` with `A = Σ^{-1/2} (Σ^{1/2} Σ' Σ^{1/2})^{1/2} Σ^{-1/2}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CocycleError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl GaussianPair {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let p = mean.len();
        if cov.len() != p || cov.iter().any(|r| r.len() != p) {
            return Err(CocycleError::ShapeMismatch("covariance must be p x p".into()));
        }
        for i in 0..p {
            for j in 0..p {
                if (cov[i][j] - cov[j][i]).abs() > 1e-10 {
                    return Err(CocycleError::Degenerate("covariance not symmetric".into()));
                }
            }
        }
        let m = to_matrix(&cov);
        let eig = m.symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(CocycleError::Degenerate(
                "covariance must be positive definite".into(),
            ));
        }
        Ok(GaussianPair { mean, cov })
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        to_matrix(&self.cov)
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = rows.len();
    DMatrix::from_fn(p, p, |i, j| rows[i][j])
}

/// Symmetric PSD matrix power via eigendecomposition.
fn sym_pow(m: &DMatrix<f64>, e: f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).powf(e)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// The transport matrix from `from`'s covariance onto `to`'s.
pub fn brenier_matrix(from: &GaussianPair, to: &GaussianPair) -> DMatrix<f64> {
    let s = from.cov_matrix();
    let s_half = sym_pow(&s, 0.5);
    let s_neg_half = sym_pow(&s, -0.5);
    let inner = sym_pow(&(&s_half * to.cov_matrix() * &s_half), 0.5);
    &s_neg_half * inner * &s_neg_half
}

/// Evaluates the gaussian Brenier map at `y`.
pub fn gaussian_brenier(from: &GaussianPair, to: &GaussianPair, y: &[f64]) -> Vec<f64> {
    let a = brenier_matrix(from, to);
    let centered = DVector::from_iterator(y.len(), y.iter().zip(&from.mean).map(|(v, m)| v - m));
    let mapped = a * centered;
    mapped.iter().zip(&to.mean).map(|(v, m)| v + m).collect()
}

/// Eigenvalues of the transport matrix; all positive for SPD covariances
/// (the map is the gradient of a convex potential).
pub fn brenier_matrix_eigenvalues(from: &GaussianPair, to: &GaussianPair) -> Vec<f64> {
    brenier_matrix(from, to).symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// The three bivariate gaussians of the incoherence construction.
pub fn incoherent_triple() -> [GaussianPair; 3] {
    [
        GaussianPair::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        GaussianPair::new(vec![1.0, 1.0], vec![vec![1.0, -0.9], vec![-0.9, 1.0]]).unwrap(),
        GaussianPair::new(vec![-1.0, 2.0], vec![vec![0.5, 0.0], vec![0.0, 5.0]]).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_when_pairs_match() {
        let g = GaussianPair::new(vec![1.0, -2.0], vec![vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let y = vec![0.7, 0.1];
        let out = gaussian_brenier(&g, &g, &y);
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn from_identity_covariance_transport_is_target_sqrt() {
        let [g0, g1, _] = incoherent_triple();
        let a = brenier_matrix(&g0, &g1);
        let sqrt = sym_pow(&g1.cov_matrix(), 0.5);
        assert!((a.clone() - sqrt).norm() < 1e-10);
        // numeric entries from the eigendecomposition of Σ₁^(1/2)
        let sq = sym_pow(&to_matrix(&[vec![1.0, -0.9], vec![-0.9, 1.0]]), 0.5);
        assert!((a[(0, 0)] - sq[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn transport_matrix_is_spd() {
        let [g0, g1, g2] = incoherent_triple();
        for (a, b) in [(&g0, &g1), (&g1, &g2), (&g0, &g2), (&g2, &g1)] {
            let eigs = brenier_matrix_eigenvalues(a, b);
            assert!(eigs.iter().all(|&l| l > 0.0), "{eigs:?}");
        }
    }

    #[test]
    fn pushforward_moments_match_target() {
        let from =
            GaussianPair::new(vec![0.0, 0.0], vec![vec![1.0, 0.2], vec![0.2, 2.0]]).unwrap();
        let to =
            GaussianPair::new(vec![1.0, -1.0], vec![vec![0.7, -0.3], vec![-0.3, 1.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        // sample from `from` via its cholesky-ish sqrt
        let sqrt = sym_pow(&from.cov_matrix(), 0.5);
        let mut mapped = Vec::with_capacity(n);
        for _ in 0..n {
            let z = [
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            ];
            let y = [
                sqrt[(0, 0)] * z[0] + sqrt[(0, 1)] * z[1],
                sqrt[(1, 0)] * z[0] + sqrt[(1, 1)] * z[1],
            ];
            mapped.push(gaussian_brenier(&from, &to, &y));
        }
        let nf = n as f64;
        let mean: Vec<f64> =
            (0..2).map(|d| mapped.iter().map(|r| r[d]).sum::<f64>() / nf).collect();
        // 3 standard errors of the mean: sd/√n with sd ≈ √diag(Σ_to)
        for d in 0..2 {
            let se = (to.cov[d][d] / nf).sqrt();
            assert!((mean[d] - to.mean[d]).abs() < 3.0 * se, "mean[{d}]={}", mean[d]);
        }
        let mut cov = [[0.0f64; 2]; 2];
        for r in &mapped {
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / nf;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                // the sample covariance entry has variance O(1/n)
                let se = ((to.cov[i][i] * to.cov[j][j] + to.cov[i][j].powi(2)) / nf).sqrt();
                assert!((cov[i][j] - to.cov[i][j]).abs() < 3.0 * se, "cov[{i}][{j}]={}", cov[i][j]);
            }
        }
    }

    #[test]
    fn non_spd_covariance_rejected() {
        assert!(GaussianPair::new(vec![0.0], vec![vec![-1.0]]).is_err());
        assert!(
            GaussianPair::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err()
        );
    }

    #[test]
    fn incoherence_matrix_norm_exceeds_threshold() {
        // ‖Σ₂^{1/2} − A₂₁ Σ₁^{1/2}‖_F > 0.1: the closed-form maps cannot be
        // path independent
        let [_, g1, g2] = incoherent_triple();
        let a21 = brenier_matrix(&g1, &g2);
        let s2h = sym_pow(&g2.cov_matrix(), 0.5);
        let s1h = sym_pow(&g1.cov_matrix(), 0.5);
        let diff = s2h - a21 * s1h;
        assert!(diff.norm() > 0.1, "frobenius {}", diff.norm());
    }

}
