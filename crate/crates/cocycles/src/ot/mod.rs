//! Optimal-transport comparison methods and the path-inconsistency
//! diagnostic they motivate.

pub mod assignment;
pub mod brenier;
pub mod quantile;
pub mod seqot;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use assignment::{solve_assignment, EmpiricalOtMap};
pub use brenier::{brenier_matrix, gaussian_brenier, incoherent_triple, GaussianPair};
pub use quantile::QuantileMap1d;
pub use seqot::{chain_nodes, NodeSpec, SeqOtModel};

/// A fitted collection of transports indexed by scalar treatment level.
pub trait LevelTransport {
    fn transport_level(&self, x_to: f64, x_from: f64, y: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathTriple {
    pub from: f64,
    pub mid: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathInconsistencyReport {
    /// Per-triple RMSE between the direct transport and the two-hop
    /// composition over the evaluation points.
    pub per_triple: Vec<(PathTriple, f64)>,
}

impl PathInconsistencyReport {
    pub fn max_rmse(&self) -> f64 {
        self.per_triple.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

/// RMSE over `eval_points` of `‖T[to,from](y) − T[to,mid](T[mid,from](y))‖₂`
/// for each requested path triple.
pub fn path_inconsistency<T: LevelTransport + ?Sized>(
    maps: &T,
    eval_points: &[Vec<f64>],
    triples: &[PathTriple],
) -> Result<PathInconsistencyReport> {
    let mut per_triple = Vec::with_capacity(triples.len());
    for t in triples {
        let mut total = 0.0;
        for y in eval_points {
            let direct = maps.transport_level(t.to, t.from, y)?;
            let hop = maps.transport_level(t.mid, t.from, y)?;
            let composed = maps.transport_level(t.to, t.mid, &hop)?;
            total += crate::cmmd::kernel::sq_dist(&direct, &composed);
        }
        per_triple.push((t.clone(), (total / eval_points.len() as f64).sqrt()));
    }
    Ok(PathInconsistencyReport { per_triple })
}

/// Gaussian Brenier maps between per-level fitted gaussians.
pub struct BrenierLevels {
    pub pairs: Vec<GaussianPair>,
}

impl LevelTransport for BrenierLevels {
    fn transport_level(&self, x_to: f64, x_from: f64, y: &[f64]) -> Result<Vec<f64>> {
        let from = &self.pairs[x_from as usize];
        let to = &self.pairs[x_to as usize];
        Ok(gaussian_brenier(from, to, y))
    }
}

/// Pairwise empirical assignment maps between per-level samples.
pub struct AssignmentLevels {
    levels: Vec<Vec<Vec<f64>>>,
    maps: Vec<Vec<Option<EmpiricalOtMap>>>,
}

impl AssignmentLevels {
    /// Fits one exact assignment per ordered pair of levels.
    pub fn fit(levels: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let k = levels.len();
        let mut maps: Vec<Vec<Option<EmpiricalOtMap>>> = (0..k).map(|_| vec![None; k]).collect();
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    maps[a][b] = Some(EmpiricalOtMap::fit(&levels[a], &levels[b])?);
                }
            }
        }
        Ok(AssignmentLevels { levels, maps })
    }

    pub fn level_sample(&self, level: usize) -> &[Vec<f64>] {
        &self.levels[level]
    }
}

impl LevelTransport for AssignmentLevels {
    fn transport_level(&self, x_to: f64, x_from: f64, y: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = (x_from as usize, x_to as usize);
        if a == b {
            return Ok(y.to_vec());
        }
        Ok(self.maps[a][b].as_ref().expect("fitted pair").map(y))
    }
}

impl LevelTransport for crate::cocycle::CocycleModel {
    fn transport_level(&self, x_to: f64, x_from: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.transport(&[x_to], &[x_from], y)
    }
}

impl LevelTransport for SeqOtModel {
    fn transport_level(&self, x_to: f64, x_from: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.transport(&[x_from], &[x_to], y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triple012() -> Vec<PathTriple> {
        vec![PathTriple { from: 0.0, mid: 1.0, to: 2.0 }]
    }

    #[test]
    fn brenier_triple_is_path_inconsistent() {
        let maps = BrenierLevels { pairs: incoherent_triple().to_vec() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                vec![
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]
            })
            .collect();
        let rep = path_inconsistency(&maps, &pts, &triple012()).unwrap();
        assert!(rep.max_rmse() > 0.1, "rmse {}", rep.max_rmse());
    }

    #[test]
    fn cocycle_maps_are_path_independent() {
        use crate::bijectors::{ConditionerSpec, LayerKind, LayerSpec, StackSpec};
        use crate::cocycle::{CocycleModel, ContextLayout};
        let spec = StackSpec {
            outcome_dim: 2,
            context_dim: 1,
            layers: vec![LayerSpec::new(
                LayerKind::TriangularAffine,
                ConditionerSpec::ConstantTable { levels: 3 },
            )],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model =
            CocycleModel::new(spec, ContextLayout { x_dim: 1, z_dim: 0 }, "affine", &mut rng)
                .unwrap();
        // arbitrary non-identity per-level parameters
        let dim = model.params.total_dim();
        let vals: Vec<f64> = (0..dim).map(|i| ((i as f64) * 0.7).sin() * 0.5).collect();
        model.params.set_flat(&vals);
        let pts: Vec<Vec<f64>> =
            (0..50).map(|i| vec![(i as f64 * 0.3).sin(), (i as f64 * 0.17).cos()]).collect();
        let rep = path_inconsistency(&model, &pts, &triple012()).unwrap();
        assert!(rep.max_rmse() < 1e-9, "rmse {}", rep.max_rmse());
    }

    #[test]
    fn assignment_identity_levels_compose_cleanly() {
        // three identical clouds: all pairwise matches are identity
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud: Vec<Vec<f64>> =
            (0..40).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let maps =
            AssignmentLevels::fit(vec![cloud.clone(), cloud.clone(), cloud.clone()]).unwrap();
        let rep = path_inconsistency(&maps, &cloud, &triple012()).unwrap();
        assert!(rep.max_rmse() < 1e-12);
    }
}
