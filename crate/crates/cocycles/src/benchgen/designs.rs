//! Synthetic structural designs with per-unit ground-truth counterfactuals
//! and, when closed-form, the true transport map.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::benchgen::noise::{draw, NoiseLaw};
use crate::causal::Target;
use crate::data::Dataset;
use crate::error::Result;

/// The ablation noise laws of the linear design, by column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationLaw {
    Gaussian,
    Gamma,
    Cauchy,
    InverseGamma,
    Rademacher,
}

impl AblationLaw {
    pub fn all() -> [AblationLaw; 5] {
        [
            AblationLaw::Gaussian,
            AblationLaw::Gamma,
            AblationLaw::Cauchy,
            AblationLaw::InverseGamma,
            AblationLaw::Rademacher,
        ]
    }

    pub fn noise(&self) -> NoiseLaw {
        match self {
            AblationLaw::Gaussian => NoiseLaw::Gaussian { mean: 0.0, sd: 1.0 },
            AblationLaw::Gamma => NoiseLaw::Gamma { shape: 1.0, scale: 1.0 },
            AblationLaw::Cauchy => NoiseLaw::Cauchy,
            AblationLaw::InverseGamma => NoiseLaw::InverseGamma { shape: 1.0, scale: 1.0 },
            AblationLaw::Rademacher => NoiseLaw::Rademacher { p: 0.5 },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AblationLaw::Gaussian => "gaussian",
            AblationLaw::Gamma => "gamma",
            AblationLaw::Cauchy => "cauchy",
            AblationLaw::InverseGamma => "inverse-gamma",
            AblationLaw::Rademacher => "rademacher",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum DesignSpec {
    /// Y(x) = (x+1)ξ with mixed-tail ξ; X ~ Bern(1/2).
    Example1Mixed { n: usize, seed: u64 },
    /// Y(x) = (x+1)ξ with ξ ~ Rad(1/2); X ~ Bern(1/2).
    Example1Binary { n: usize, seed: u64 },
    /// Y = X + ξ with X ~ N(0,1) and the named ablation noise.
    LinearAblation { law: AblationLaw, n: usize, seed: u64 },
    /// Chain X → Y1 → Y2 with jointly gaussian, correlation-ρ noise and
    /// X ~ N(0,1); the true transport is the joint shift by Δ.
    Chain { rho: f64, n: usize, seed: u64 },
    /// Y = 1·x + L(x)ξ over arms x ∈ {0,1,2} with iid standard Laplace ξ;
    /// θ controls how far the arm maps are from shifts of one another.
    Triangle { theta: f64, n_per_arm: usize, seed: u64 },
    /// Two-node benchmark: Y = X + ξ, X ~ N(0,1), ξ ~ IG(1,1).
    TwoVarLin { n: usize, seed: u64 },
    /// Two-node benchmark: Y = sin(X) + ξ.
    TwoVarNonlin { n: usize, seed: u64 },
    /// Y = a·x + ξ on two outcomes; ξ is either correlated-free gaussian or
    /// the heavy/disconnected pair (t₃ ⊗ uniform mixture).
    PlaneShift2d { n: usize, seed: u64, gaussian_noise: bool },
}

/// Closed-form transports for designs that admit one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum TrueTransport {
    /// y + β(x' − x) per coordinate.
    LinearShift { beta: f64 },
    /// y · (x'+1)/(x+1).
    ScaleByLevel,
    /// (y₁ + Δ, y₂ + Δ) with Δ = x' − x.
    JointShift,
    /// y + (sin x' − sin x).
    SineShift,
    /// y + a (x' − x).
    PlaneShift { a: Vec<f64> },
}

impl TrueTransport {
    pub fn apply(&self, x_to: f64, x_from: f64, y: &[f64]) -> Vec<f64> {
        match self {
            TrueTransport::LinearShift { beta } => {
                y.iter().map(|v| v + beta * (x_to - x_from)).collect()
            }
            TrueTransport::ScaleByLevel => {
                y.iter().map(|v| v * (x_to + 1.0) / (x_from + 1.0)).collect()
            }
            TrueTransport::JointShift => y.iter().map(|v| v + (x_to - x_from)).collect(),
            TrueTransport::SineShift => {
                y.iter().map(|v| v + x_to.sin() - x_from.sin()).collect()
            }
            TrueTransport::PlaneShift { a } => {
                y.iter().zip(a).map(|(v, ai)| v + ai * (x_to - x_from)).collect()
            }
        }
    }
}

/// Per-unit counterfactual truths at the design's evaluation targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub targets: Vec<Target>,
    /// `counterfactuals[t][i]`: unit i's true outcome at target t.
    pub counterfactuals: Vec<Vec<Vec<f64>>>,
    /// A fresh sample from the true effect law (first vs second target),
    /// where the design defines one.
    pub effect_samples: Option<Vec<Vec<f64>>>,
    pub transport: Option<TrueTransport>,
}

pub fn generate(spec: &DesignSpec) -> Result<(Dataset, GroundTruth)> {
    match spec {
        DesignSpec::Example1Mixed { n, seed } => {
            example1(*n, *seed, &NoiseLaw::HalfNormalMinusHalfNbp { a: 0.1, b: 0.1 })
        }
        DesignSpec::Example1Binary { n, seed } => {
            example1(*n, *seed, &NoiseLaw::Rademacher { p: 0.5 })
        }
        DesignSpec::LinearAblation { law, n, seed } => linear_ablation(*law, *n, *seed),
        DesignSpec::Chain { rho, n, seed } => chain(*rho, *n, *seed),
        DesignSpec::Triangle { theta, n_per_arm, seed } => triangle(*theta, *n_per_arm, *seed),
        DesignSpec::TwoVarLin { n, seed } => twovar(false, *n, *seed),
        DesignSpec::TwoVarNonlin { n, seed } => twovar(true, *n, *seed),
        DesignSpec::PlaneShift2d { n, seed, gaussian_noise } => {
            plane_shift(*n, *seed, *gaussian_noise)
        }
    }
}

fn example1(n: usize, seed: u64, law: &NoiseLaw) -> Result<(Dataset, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut cf0 = Vec::with_capacity(n);
    let mut cf1 = Vec::with_capacity(n);
    let mut effects = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = draw(law, &mut rng)[0];
        let t = f64::from(rng.gen_bool(0.5));
        x.push(vec![t]);
        y.push(vec![(t + 1.0) * xi]);
        cf0.push(vec![xi]);
        cf1.push(vec![2.0 * xi]);
        // Y(1) − Y(0) = ξ
        effects.push(vec![xi]);
    }
    let data = Dataset::new(Vec::new(), x, y)?;
    Ok((
        data,
        GroundTruth {
            targets: vec![Target::level(0.0), Target::level(1.0)],
            counterfactuals: vec![cf0, cf1],
            effect_samples: Some(effects),
            transport: Some(TrueTransport::ScaleByLevel),
        },
    ))
}

fn linear_ablation(law: AblationLaw, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let noise = law.noise();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut cf0 = Vec::with_capacity(n);
    let mut cf_shift = Vec::with_capacity(n);
    for _ in 0..n {
        let xv: f64 = rng.sample(StandardNormal);
        let xi = draw(&noise, &mut rng)[0];
        x.push(vec![xv]);
        y.push(vec![xv + xi]);
        cf0.push(vec![xi]);
        cf_shift.push(vec![xv + 1.0 + xi]);
    }
    Ok((
        Dataset::new(Vec::new(), x, y)?,
        GroundTruth {
            targets: vec![Target::level(0.0), Target::shift(1.0)],
            counterfactuals: vec![cf0, cf_shift],
            effect_samples: None,
            transport: Some(TrueTransport::LinearShift { beta: 1.0 }),
        },
    ))
}

fn chain(rho: f64, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let noise = NoiseLaw::CorrelatedGaussian { rho };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut cf = Vec::with_capacity(n);
    for _ in 0..n {
        let xv: f64 = rng.sample(StandardNormal);
        let e = draw(&noise, &mut rng);
        let y1 = xv + e[0];
        let y2 = y1 + e[1];
        x.push(vec![xv]);
        y.push(vec![y1, y2]);
        // shift intervention x → x+1 moves both outcomes by 1
        cf.push(vec![y1 + 1.0, y2 + 1.0]);
    }
    Ok((
        Dataset::new(Vec::new(), x, y)?,
        GroundTruth {
            targets: vec![Target::shift(1.0)],
            counterfactuals: vec![cf],
            effect_samples: None,
            transport: Some(TrueTransport::JointShift),
        },
    ))
}

/// Arm mixing matrices: L(0) = I, L(1) = [[1,-θ],[-θ,1]],
/// L(2) = [[θ+1, 1],[1, 1/(1+θ)]].
pub fn triangle_matrix(theta: f64, arm: usize) -> [[f64; 2]; 2] {
    match arm {
        0 => [[1.0, 0.0], [0.0, 1.0]],
        1 => [[1.0, -theta], [-theta, 1.0]],
        2 => [[theta + 1.0, 1.0], [1.0, 1.0 / (1.0 + theta)]],
        _ => panic!("triangle design has arms 0..3"),
    }
}

fn triangle(theta: f64, n_per_arm: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law = NoiseLaw::Laplace { scale: 1.0 };
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut cfs: Vec<Vec<Vec<f64>>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for arm in 0..3usize {
        let l = triangle_matrix(theta, arm);
        for _ in 0..n_per_arm {
            let e = [draw(&law, &mut rng)[0], draw(&law, &mut rng)[0]];
            let outcome = |m: &[[f64; 2]; 2], a: f64| {
                vec![a + m[0][0] * e[0] + m[0][1] * e[1], a + m[1][0] * e[0] + m[1][1] * e[1]]
            };
            x.push(vec![arm as f64]);
            y.push(outcome(&l, arm as f64));
            for target_arm in 0..3usize {
                let lt = triangle_matrix(theta, target_arm);
                cfs[target_arm].push(outcome(&lt, target_arm as f64));
            }
        }
    }
    Ok((
        Dataset::new(Vec::new(), x, y)?,
        GroundTruth {
            targets: vec![Target::level(0.0), Target::level(1.0), Target::level(2.0)],
            counterfactuals: cfs,
            effect_samples: None,
            transport: None,
        },
    ))
}

fn twovar(nonlinear: bool, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    let noise = NoiseLaw::InverseGamma { shape: 1.0, scale: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut cf0 = Vec::with_capacity(n);
    for _ in 0..n {
        let xv: f64 = rng.sample(StandardNormal);
        let xi = draw(&noise, &mut rng)[0];
        let m = if nonlinear { xv.sin() } else { xv };
        x.push(vec![xv]);
        y.push(vec![m + xi]);
        cf0.push(vec![xi]); // do(X=0): sin(0) = 0 either way
    }
    Ok((
        Dataset::new(Vec::new(), x, y)?,
        GroundTruth {
            targets: vec![Target::level(0.0)],
            counterfactuals: vec![cf0],
            effect_samples: None,
            transport: Some(if nonlinear {
                TrueTransport::SineShift
            } else {
                TrueTransport::LinearShift { beta: 1.0 }
            }),
        },
    ))
}

fn plane_shift(n: usize, seed: u64, gaussian_noise: bool) -> Result<(Dataset, GroundTruth)> {
    let a = vec![1.0, -1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t3 = NoiseLaw::StudentT { dof: 3.0 };
    let um = NoiseLaw::UniformMixture;
    let g = NoiseLaw::Gaussian { mean: 0.0, sd: 1.0 };
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut cf = Vec::with_capacity(n);
    for _ in 0..n {
        let xv: f64 = rng.sample(StandardNormal);
        let e = if gaussian_noise {
            [draw(&g, &mut rng)[0], draw(&g, &mut rng)[0]]
        } else {
            [draw(&t3, &mut rng)[0], draw(&um, &mut rng)[0]]
        };
        let row = vec![a[0] * xv + e[0], a[1] * xv + e[1]];
        cf.push(vec![a[0] * (xv + 1.0) + e[0], a[1] * (xv + 1.0) + e[1]]);
        x.push(vec![xv]);
        y.push(row);
    }
    Ok((
        Dataset::new(Vec::new(), x, y)?,
        GroundTruth {
            targets: vec![Target::shift(1.0)],
            counterfactuals: vec![cf],
            effect_samples: None,
            transport: Some(TrueTransport::PlaneShift { a }),
        },
    ))
}
