//! Exact empirical optimal transport between equal-size point clouds under
//! quadratic cost, solved as a linear assignment problem.

use crate::cmmd::kernel::sq_dist;
use crate::error::{CocycleError, Result};

/// Exact minimum-cost assignment by shortest augmenting paths with
/// potentials. `cost[i][j]` is the cost of assigning row i to column j;
/// returns the column matched to each row.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(n > 0 && cost.iter().all(|r| r.len() == n), "square cost matrix required");
    let inf = f64::INFINITY;
    // 1-indexed row/column potentials; index 0 is scratch for the phase root
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut match_col = vec![0usize; n + 1]; // column -> matched row
    for i in 1..=n {
        match_col[0] = i;
        let mut j0 = 0usize;
        let mut mins = vec![inf; n + 1];
        let mut links = vec![0usize; n + 1];
        let mut visited = vec![false; n + 1];
        loop {
            visited[j0] = true;
            let i0 = match_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if visited[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < mins[j] {
                    mins[j] = reduced;
                    links[j] = j0;
                }
                if mins[j] < delta {
                    delta = mins[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if visited[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    mins[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path back to the root
        while j0 != 0 {
            let j1 = links[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if match_col[j] > 0 {
            row_to_col[match_col[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Fitted empirical OT map: an optimal permutation matching the fitted
/// source points to the fitted target points; new points are mapped through
/// their nearest fitted source.
#[derive(Debug, Clone)]
pub struct EmpiricalOtMap {
    pub source: Vec<Vec<f64>>,
    pub matched: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub cost: f64,
}

impl EmpiricalOtMap {
    pub fn fit(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Self> {
        if source.len() != target.len() || source.is_empty() {
            return Err(CocycleError::ShapeMismatch(format!(
                "assignment needs equal-size nonempty clouds, got {} and {}",
                source.len(),
                target.len()
            )));
        }
        let cost: Vec<Vec<f64>> = source
            .iter()
            .map(|s| target.iter().map(|t| sq_dist(s, t)).collect())
            .collect();
        let assignment = solve_assignment(&cost);
        let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        let matched = assignment.iter().map(|&j| target[j].clone()).collect();
        Ok(EmpiricalOtMap {
            source: source.to_vec(),
            matched,
            assignment,
            cost: total,
        })
    }

    /// Barycentric projection at a fitted point is its matched target; new
    /// points inherit the match of the nearest fitted source.
    pub fn map(&self, y: &[f64]) -> Vec<f64> {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.source.iter().enumerate() {
            let d = sq_dist(s, y);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        self.matched[best].clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_cost(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                *best = best.min(acc);
                return;
            }
            if acc >= *best {
                return;
            }
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    go(cost, row + 1, used, acc + cost[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn one_dimensional_optimum_is_sorted_order() {
        // brute force over all 3! permutations for n=3
        let src = vec![vec![0.0], vec![2.0], vec![1.0]];
        let tgt = vec![vec![10.0], vec![12.0], vec![11.0]];
        let m = EmpiricalOtMap::fit(&src, &tgt).unwrap();
        assert_eq!(m.map(&[0.0]), vec![10.0]);
        assert_eq!(m.map(&[1.0]), vec![11.0]);
        assert_eq!(m.map(&[2.0]), vec![12.0]);
    }

    #[test]
    fn identical_clouds_are_matched_at_zero_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> =
            (0..30).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let m = EmpiricalOtMap::fit(&pts, &pts).unwrap();
        assert!(m.cost.abs() < 1e-12);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(&m.matched[i], p);
        }
    }

    #[test]
    fn matches_exhaustive_oracle_up_to_n8() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=8usize {
            for _ in 0..3 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
                    .collect();
                let a = solve_assignment(&cost);
                let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                let want = brute_force_cost(&cost);
                assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
                // proper permutation
                let mut seen = vec![false; n];
                for &j in &a {
                    assert!(!seen[j]);
                    seen[j] = true;
                }
            }
        }
    }

    #[test]
    fn beats_random_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let src: Vec<Vec<f64>> =
            (0..n).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let tgt: Vec<Vec<f64>> =
            (0..n).map(|_| vec![rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..3.0)]).collect();
        let m = EmpiricalOtMap::fit(&src, &tgt).unwrap();
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..n).collect();
        for _ in 0..1000 {
            perm.shuffle(&mut rng);
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| sq_dist(&src[i], &tgt[j])).sum();
            assert!(m.cost <= c + 1e-12);
        }
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = vec![vec![0.0]];
        let b = vec![vec![0.0], vec![1.0]];
        assert!(EmpiricalOtMap::fit(&a, &b).is_err());
    }
}
