//! Monotone rational-quadratic spline on [-B, B] with identity tails.
//!
//! Raw conditioner outputs are turned into bin widths/heights through a
//! floored softmax and into knot derivatives through a floored softplus;
//! boundary derivatives are pinned to 1 so the map is C¹ where the linear
//! tails take over.

use crate::numerics::Scalar;

pub const MIN_BIN_FRACTION: f64 = 1e-3;
pub const DERIVATIVE_FLOOR: f64 = 1e-3;

/// Raw bundle length for a `bins`-bin spline: widths, heights, interior
/// derivatives.
pub fn bundle_len(bins: usize) -> usize {
    3 * bins - 1
}

/// Raw bias that makes the floored softplus derivative equal one.
pub fn identity_derivative_raw() -> f64 {
    // softplus(x) = ln(1+e^x) = 1 - floor  =>  x = ln(e^(1-floor) - 1)
    ((1.0 - DERIVATIVE_FLOOR).exp() - 1.0).ln()
}

/// Knot locations and derivatives decoded from a raw bundle.
pub struct SplineKnots<S> {
    pub xs: Vec<S>,
    pub ys: Vec<S>,
    pub derivs: Vec<S>, // length bins+1, boundary entries fixed at 1
}

pub fn decode<S: Scalar>(raw: &[S], bins: usize, tail_bound: f64) -> SplineKnots<S> {
    debug_assert_eq!(raw.len(), bundle_len(bins));
    let (w_raw, rest) = raw.split_at(bins);
    let (h_raw, d_raw) = rest.split_at(bins);
    let xs = knot_positions(w_raw, tail_bound);
    let ys = knot_positions(h_raw, tail_bound);
    let one = raw[0].constant_like(1.0);
    let mut derivs = Vec::with_capacity(bins + 1);
    derivs.push(one);
    for &d in d_raw {
        derivs.push(softplus(d) + DERIVATIVE_FLOOR);
    }
    derivs.push(one);
    SplineKnots { xs, ys, derivs }
}

/// Floored softmax over `raw`, scaled to partition [-B, B]; returns the
/// bins+1 knot positions.
fn knot_positions<S: Scalar>(raw: &[S], tail_bound: f64) -> Vec<S> {
    let k = raw.len();
    // stabilized softmax: subtracting the primal max is gradient-neutral
    let max = raw.iter().map(|r| r.val()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<S> = raw.iter().map(|&r| (r - max).exp()).collect();
    let total = S::sum(&exps);
    let scale = (1.0 - k as f64 * MIN_BIN_FRACTION) * 2.0 * tail_bound;
    let floor = MIN_BIN_FRACTION * 2.0 * tail_bound;
    let mut pos = Vec::with_capacity(k + 1);
    let mut cum = raw[0].constant_like(-tail_bound);
    pos.push(cum);
    for e in &exps {
        cum = cum + (*e / total) * scale + floor;
        pos.push(cum);
    }
    pos
}

fn softplus<S: Scalar>(x: S) -> S {
    // ln(1+e^x) with the large-x branch handled on the primal
    if x.val() > 30.0 {
        x
    } else {
        (x.exp() + 1.0).ln()
    }
}

fn find_bin<S: Scalar>(knots: &[S], v: f64) -> usize {
    let k = knots.len() - 1;
    let mut lo = 0usize;
    let mut hi = k;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if v < knots[mid].val() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo.min(k - 1)
}

/// Value and log-derivative of the spline (identity outside the tail bound).
pub fn forward<S: Scalar>(knots: &SplineKnots<S>, u: S, tail_bound: f64) -> (S, S) {
    if u.val() <= -tail_bound || u.val() >= tail_bound {
        return (u, u.constant_like(0.0));
    }
    let k = find_bin(&knots.xs, u.val());
    let w = knots.xs[k + 1] - knots.xs[k];
    let h = knots.ys[k + 1] - knots.ys[k];
    let s = h / w;
    let d0 = knots.derivs[k];
    let d1 = knots.derivs[k + 1];
    let xi = (u - knots.xs[k]) / w;
    let xi1m = xi.rsub(1.0);
    let q = xi * xi1m;
    let denom = s + (d1 + d0 - s * 2.0) * q;
    let y = knots.ys[k] + h * (s * xi * xi + d0 * q) / denom;
    let dy = s * s * (d1 * xi * xi + s * 2.0 * q + d0 * xi1m * xi1m) / (denom * denom);
    (y, dy.ln())
}

/// Exact inverse via the closed-form quadratic root, plus the log-derivative
/// of the forward map at the recovered point.
pub fn inverse<S: Scalar>(knots: &SplineKnots<S>, y: S, tail_bound: f64) -> (S, S) {
    if y.val() <= -tail_bound || y.val() >= tail_bound {
        return (y, y.constant_like(0.0));
    }
    let k = find_bin(&knots.ys, y.val());
    let w = knots.xs[k + 1] - knots.xs[k];
    let h = knots.ys[k + 1] - knots.ys[k];
    let s = h / w;
    let d0 = knots.derivs[k];
    let d1 = knots.derivs[k + 1];
    let r = y - knots.ys[k];
    let dsum = d1 + d0 - s * 2.0;
    let a = h * (s - d0) + r * dsum;
    let b = h * d0 - r * dsum;
    let c = -(s * r);
    let disc = (b * b - a * c * 4.0).sqrt();
    let xi = (c * 2.0) / (-(b + disc));
    let u = xi * w + knots.xs[k];
    let xi1m = xi.rsub(1.0);
    let q = xi * xi1m;
    let denom = s + dsum * q;
    let dy = s * s * (d1 * xi * xi + s * 2.0 * q + d0 * xi1m * xi1m) / (denom * denom);
    (u, dy.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_raw(bins: usize) -> Vec<f64> {
        let mut raw = vec![0.0; 2 * bins];
        raw.extend(std::iter::repeat(identity_derivative_raw()).take(bins - 1));
        raw
    }

    #[test]
    fn identity_parameterization_is_identity() {
        let raw = identity_raw(8);
        let knots = decode::<f64>(&raw, 8, 5.0);
        for i in 0..101 {
            let u = -5.0 + 0.1 * i as f64;
            let (y, ldj) = forward(&knots, u, 5.0);
            assert!((y - u).abs() < 1e-9, "forward({u}) = {y}");
            assert!(ldj.abs() < 1e-9);
            let (back, _) = inverse(&knots, u, 5.0);
            assert!((back - u).abs() < 1e-9);
        }
    }

    #[test]
    fn round_trip_random_parameters() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let raw: Vec<f64> = (0..bundle_len(8)).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let knots = decode::<f64>(&raw, 8, 5.0);
            for _ in 0..20 {
                let u: f64 = rng.gen_range(-7.0..7.0);
                let (y, ldj_f) = forward(&knots, u, 5.0);
                let (back, ldj_i) = inverse(&knots, y, 5.0);
                assert!((back - u).abs() < 1e-8, "round trip {u} -> {y} -> {back}");
                assert!((ldj_f - ldj_i).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn monotone_and_continuous_at_knots() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..bundle_len(8)).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let knots = decode::<f64>(&raw, 8, 5.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let u = -5.2 + 10.4 * i as f64 / 1000.0;
            let (y, _) = forward(&knots, u, 5.0);
            assert!(y > prev, "not strictly increasing at u={u}");
            prev = y;
        }
        // continuity of value and derivative at every knot and at ±B
        let eps = 1e-7;
        for k in 0..knots.xs.len() {
            let x = knots.xs[k];
            let (y_l, d_l) = forward(&knots, x - eps, 5.0);
            let (y_r, d_r) = forward(&knots, x + eps, 5.0);
            assert!((y_l - y_r).abs() < 1e-5);
            assert!((d_l - d_r).abs() < 1e-3, "derivative jump at knot {k}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let raw: Vec<f64> = (0..bundle_len(8)).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let knots = decode::<f64>(&raw, 8, 5.0);
        for i in 0..40 {
            let u = -4.5 + 0.23 * i as f64;
            let (_, ldj) = forward(&knots, u, 5.0);
            let h = 1e-6;
            let (y_p, _) = forward(&knots, u + h, 5.0);
            let (y_m, _) = forward(&knots, u - h, 5.0);
            let fd = ((y_p - y_m) / (2.0 * h)).ln();
            assert!((ldj - fd).abs() < 1e-4, "u={u}: {ldj} vs fd {fd}");
        }
    }
}
