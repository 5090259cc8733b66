//! Seeded samplers for every noise law used by the synthetic designs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Cauchy, Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CocycleError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum NoiseLaw {
    Gaussian { mean: f64, sd: f64 },
    Laplace { scale: f64 },
    StudentT { dof: f64 },
    /// t with one degree of freedom.
    Cauchy,
    Gamma { shape: f64, scale: f64 },
    InverseGamma { shape: f64, scale: f64 },
    Rademacher { p: f64 },
    GaussianMixture { weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64> },
    /// ξ = ½|N(0,1)| − ½|NBP(a,b)|: light right tail, heavy left tail.
    HalfNormalMinusHalfNbp { a: f64, b: f64 },
    /// ½ U(-3/2, -1/2) + ½ U(1/2, 3/2): disconnected support.
    UniformMixture,
    /// Two coordinates, standard Laplace marginals, gaussian copula with
    /// correlation rho.
    CorrelatedLaplace { rho: f64 },
    /// Two coordinates, unit-variance gaussian with correlation rho.
    CorrelatedGaussian { rho: f64 },
}

impl NoiseLaw {
    pub fn dim(&self) -> usize {
        match self {
            NoiseLaw::CorrelatedLaplace { .. } | NoiseLaw::CorrelatedGaussian { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CocycleError::InvalidConfig(msg.into()));
        match self {
            NoiseLaw::Gaussian { sd, .. } if !(*sd > 0.0) => bad("gaussian sd must be > 0"),
            NoiseLaw::Laplace { scale } if !(*scale > 0.0) => bad("laplace scale must be > 0"),
            NoiseLaw::StudentT { dof } if !(*dof > 0.0) => bad("student-t dof must be > 0"),
            NoiseLaw::Gamma { shape, scale } | NoiseLaw::InverseGamma { shape, scale }
                if !(*shape > 0.0 && *scale > 0.0) =>
            {
                bad("gamma parameters must be > 0")
            }
            NoiseLaw::Rademacher { p } if !(*p > 0.0 && *p < 1.0) => {
                bad("rademacher p must be in (0,1)")
            }
            NoiseLaw::GaussianMixture { weights, means, sds } => {
                if weights.len() != means.len()
                    || weights.len() != sds.len()
                    || weights.is_empty()
                {
                    return bad("mixture components disagree in length");
                }
                if weights.iter().any(|w| *w < 0.0) || sds.iter().any(|s| !(*s > 0.0)) {
                    return bad("mixture weights must be >= 0 and sds > 0");
                }
                Ok(())
            }
            NoiseLaw::HalfNormalMinusHalfNbp { a, b } if !(*a > 0.0 && *b > 0.0) => {
                bad("beta-prime parameters must be > 0")
            }
            NoiseLaw::CorrelatedLaplace { rho } | NoiseLaw::CorrelatedGaussian { rho }
                if !(-1.0..=1.0).contains(rho) =>
            {
                bad("correlation must lie in [-1, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// n iid draws, bit-reproducible for a given (law, n, seed).
pub fn sample_noise(law: &NoiseLaw, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    law.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| draw(law, &mut rng)).collect())
}

pub fn draw(law: &NoiseLaw, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match law {
        NoiseLaw::Gaussian { mean, sd } => {
            let z: f64 = rng.sample(StandardNormal);
            vec![mean + sd * z]
        }
        NoiseLaw::Laplace { scale } => vec![laplace_inv_cdf(rng.gen_range(0.0..1.0)) * scale],
        NoiseLaw::StudentT { dof } => {
            vec![StudentT::new(*dof).expect("validated").sample(rng)]
        }
        NoiseLaw::Cauchy => vec![Cauchy::new(0.0, 1.0).expect("validated").sample(rng)],
        NoiseLaw::Gamma { shape, scale } => {
            vec![Gamma::new(*shape, *scale).expect("validated").sample(rng)]
        }
        NoiseLaw::InverseGamma { shape, scale } => {
            let g: f64 = Gamma::new(*shape, 1.0 / scale).expect("validated").sample(rng);
            vec![1.0 / g]
        }
        NoiseLaw::Rademacher { p } => vec![if rng.gen_bool(*p) { 1.0 } else { -1.0 }],
        NoiseLaw::GaussianMixture { weights, means, sds } => {
            let total: f64 = weights.iter().sum();
            let mut u = rng.gen_range(0.0..total);
            let mut k = 0;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    k = i;
                    break;
                }
                u -= w;
                k = i;
            }
            let z: f64 = rng.sample(StandardNormal);
            vec![means[k] + sds[k] * z]
        }
        NoiseLaw::HalfNormalMinusHalfNbp { a, b } => {
            if rng.gen_bool(0.5) {
                let z: f64 = rng.sample(StandardNormal);
                vec![z.abs()]
            } else {
                vec![-nbp_draw(*a, *b, rng).abs()]
            }
        }
        NoiseLaw::UniformMixture => {
            let u = rng.gen_range(0.5..1.5);
            vec![if rng.gen_bool(0.5) { u } else { -u }]
        }
        NoiseLaw::CorrelatedLaplace { rho } => {
            let (z1, z2) = correlated_normals(*rho, rng);
            let norm = Normal::new(0.0, 1.0).unwrap();
            // unit-variance Laplace marginals through the gaussian copula
            let scale = 1.0 / 2.0f64.sqrt();
            vec![
                laplace_inv_cdf(norm.cdf(z1)) * scale,
                laplace_inv_cdf(norm.cdf(z2)) * scale,
            ]
        }
        NoiseLaw::CorrelatedGaussian { rho } => {
            let (z1, z2) = correlated_normals(*rho, rng);
            vec![z1, z2]
        }
    }
}

fn correlated_normals(rho: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (a, rho * a + (1.0 - rho * rho).sqrt() * b)
}

/// Standard Laplace(0,1) quantile function.
fn laplace_inv_cdf(u: f64) -> f64 {
    let u = u.clamp(1e-300, 1.0 - 1e-16);
    if u < 0.5 {
        (2.0 * u).ln()
    } else {
        -(2.0 * (1.0 - u)).ln()
    }
}

/// Normal-beta-prime draw: a gaussian scale mixture whose squared scale has
/// a beta-prime law.
fn nbp_draw(a: f64, b: f64, rng: &mut ChaCha8Rng) -> f64 {
    let beta = Beta::new(a, b).expect("validated").sample(rng);
    let beta = f64::clamp(beta, 1e-300, 1.0 - 1e-14);
    let var = beta / (1.0 - beta);
    let z: f64 = rng.sample(StandardNormal);
    var.sqrt() * z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(law: &NoiseLaw, n: usize, seed: u64) -> Vec<f64> {
        sample_noise(law, n, seed).unwrap().into_iter().map(|v| v[0]).collect()
    }

    #[test]
    fn seed_determinism_bit_identical() {
        let law = NoiseLaw::HalfNormalMinusHalfNbp { a: 0.1, b: 0.1 };
        let a = sample_noise(&law, 500, 9).unwrap();
        let b = sample_noise(&law, 500, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_noise(&law, 500, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rademacher_support_and_mean() {
        let n = 40_000;
        let xs = flat(&NoiseLaw::Rademacher { p: 0.5 }, n, 1);
        assert!(xs.iter().all(|v| *v == 1.0 || *v == -1.0));
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn gaussian_mixture_variance() {
        // ½N(−√3/2, ½) + ½N(√3/2, ½): variance ¾ + ½ = 1.25
        let s3 = 3.0f64.sqrt() / 2.0;
        let law = NoiseLaw::GaussianMixture {
            weights: vec![0.5, 0.5],
            means: vec![-s3, s3],
            sds: vec![0.5f64.sqrt(), 0.5f64.sqrt()],
        };
        let n = 60_000;
        let xs = flat(&law, n, 3);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!((var - 1.25).abs() < 0.05, "var={var}");
    }

    #[test]
    fn correlated_laplace_degenerate_at_rho_one() {
        let law = NoiseLaw::CorrelatedLaplace { rho: 1.0 };
        for row in sample_noise(&law, 200, 5).unwrap() {
            assert!((row[0] - row[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn correlated_gaussian_matches_requested_correlation() {
        let law = NoiseLaw::CorrelatedGaussian { rho: 0.8 };
        let rows = sample_noise(&law, 50_000, 2).unwrap();
        let n = rows.len() as f64;
        let m1 = rows.iter().map(|r| r[0]).sum::<f64>() / n;
        let m2 = rows.iter().map(|r| r[1]).sum::<f64>() / n;
        let cov = rows.iter().map(|r| (r[0] - m1) * (r[1] - m2)).sum::<f64>() / n;
        assert!((cov - 0.8).abs() < 0.03, "cov={cov}");
    }

    #[test]
    fn mixed_tail_law_is_asymmetric() {
        let law = NoiseLaw::HalfNormalMinusHalfNbp { a: 0.1, b: 0.1 };
        let xs = flat(&law, 100_000, 7);
        let right_extreme = xs.iter().filter(|v| **v > 8.0).count();
        let left_extreme = xs.iter().filter(|v| **v < -20.0).count();
        assert_eq!(right_extreme, 0, "right tail must be light (half-normal)");
        assert!(left_extreme > 100, "left tail must be heavy, got {left_extreme}");
        assert!(xs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn uniform_mixture_support() {
        let xs = flat(&NoiseLaw::UniformMixture, 10_000, 4);
        for v in &xs {
            let a = v.abs();
            assert!((0.5..=1.5).contains(&a), "outside support: {v}");
        }
        let positive = xs.iter().filter(|v| **v > 0.0).count() as f64 / xs.len() as f64;
        assert!((positive - 0.5).abs() < 0.03);
    }

    #[test]
    fn gamma_mean_matches() {
        let xs = flat(&NoiseLaw::Gamma { shape: 1.0, scale: 1.0 }, 60_000, 6);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.0).abs() < 0.03);
        assert!(xs.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn inverse_gamma_is_heavy_tailed_positive() {
        let xs = flat(&NoiseLaw::InverseGamma { shape: 1.0, scale: 1.0 }, 60_000, 8);
        assert!(xs.iter().all(|v| *v > 0.0 && v.is_finite()));
        // median of IG(1,1) is 1/ln 2
        let mut s = xs.clone();
        s.sort_by(f64::total_cmp);
        let med = s[s.len() / 2];
        assert!((med - 1.0 / 2.0f64.ln()).abs() < 0.05, "median={med}");
        // heavy right tail present
        assert!(xs.iter().filter(|v| **v > 100.0).count() > 100);
    }

    #[test]
    fn invalid_parameters_error() {
        assert!(sample_noise(&NoiseLaw::Gaussian { mean: 0.0, sd: -1.0 }, 10, 0).is_err());
        assert!(sample_noise(&NoiseLaw::Rademacher { p: 1.5 }, 10, 0).is_err());
        assert!(sample_noise(&NoiseLaw::StudentT { dof: 0.0 }, 10, 0).is_err());
    }

    #[test]
    fn laplace_variance() {
        let xs = flat(&NoiseLaw::Laplace { scale: 1.0 }, 60_000, 11);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / xs.len() as f64;
        assert!((var - 2.0).abs() < 0.08, "var={var}");
    }
}
