//! Reverse-mode differentiation over a replayable operation record.
//!
//! A [`Tape`] records every elementary operation applied to [`Var`]s during a
//! scalar loss evaluation, caching the local partial derivatives at forward
//! time. [`Tape::adjoints`] then replays the record backwards in a single
//! sweep. Dot products are recorded as one fused node with a variable-arity
//! parent list, which keeps dense conditioner layers cheap.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use statrs::function::gamma;

const WIDE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

#[derive(Default)]
struct TapeInner {
    nodes: Vec<Node>,
    // fused nodes: (start, len) ranges into wide_parents/wide_partials
    wide: Vec<(u32, u32)>,
    wide_parents: Vec<u32>,
    wide_partials: Vec<f64>,
    constants: Vec<u32>,
}

/// Operation record for one loss evaluation. Single-use per evaluation
/// stream; call [`Tape::clear`] to reuse the allocation.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<TapeInner>,
}

/// A scalar value recorded on a tape. Copyable; carries its primal value so
/// control flow can branch on magnitudes without touching the record.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops the record but keeps allocations for the next evaluation.
    pub fn clear(&self) {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.clear();
        inner.wide.clear();
        inner.wide_parents.clear();
        inner.wide_partials.clear();
        inner.constants.clear();
    }

    fn push(&self, parents: [u32; 2], partials: [f64; 2], val: f64) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.nodes.len() as u32;
        inner.nodes.push(Node { parents, partials });
        drop(inner);
        Var { tape: self, idx, val }
    }

    /// Registers a differentiable input (a leaf with respect to itself).
    pub fn input(&self, val: f64) -> Var<'_> {
        self.push([WIDE - 1, WIDE - 1], [0.0, 0.0], val)
    }

    /// Registers the flat slice as consecutive differentiable inputs.
    pub fn inputs(&self, vals: &[f64]) -> Vec<Var<'_>> {
        vals.iter().map(|&v| self.input(v)).collect()
    }

    /// A node whose adjoint is pinned to zero.
    pub fn constant(&self, val: f64) -> Var<'_> {
        let v = self.push([WIDE - 1, WIDE - 1], [0.0, 0.0], val);
        self.inner.borrow_mut().constants.push(v.idx);
        v
    }

    fn unary(&self, a: Var<'_>, d: f64, val: f64) -> Var<'_> {
        self.push([a.idx, a.idx], [d, 0.0], val)
    }

    fn binary(&self, a: Var<'_>, b: Var<'_>, da: f64, db: f64, val: f64) -> Var<'_> {
        self.push([a.idx, b.idx], [da, db], val)
    }

    fn finish_wide(&self, inner: &mut TapeInner, start: u32, val: f64) -> Var<'_> {
        let len = inner.wide_parents.len() as u32 - start;
        let widx = inner.wide.len() as u32;
        inner.wide.push((start, len));
        let idx = inner.nodes.len() as u32;
        inner.nodes.push(Node { parents: [WIDE, widx], partials: [0.0, 0.0] });
        Var { tape: self, idx, val }
    }

    fn fused_dot(&self, a: &[Var<'_>], b: &[Var<'_>]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let start = inner.wide_parents.len() as u32;
        inner.wide_parents.reserve(2 * a.len());
        inner.wide_partials.reserve(2 * a.len());
        let mut val = 0.0;
        for (x, y) in a.iter().zip(b) {
            val += x.val * y.val;
            inner.wide_parents.push(x.idx);
            inner.wide_parents.push(y.idx);
            inner.wide_partials.push(y.val);
            inner.wide_partials.push(x.val);
        }
        self.finish_wide(&mut inner, start, val)
    }

    fn fused_dot_data(&self, w: &[Var<'_>], x: &[f64]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let start = inner.wide_parents.len() as u32;
        inner.wide_parents.reserve(w.len());
        inner.wide_partials.reserve(w.len());
        let mut val = 0.0;
        for (a, &b) in w.iter().zip(x) {
            val += a.val * b;
            inner.wide_parents.push(a.idx);
            inner.wide_partials.push(b);
        }
        self.finish_wide(&mut inner, start, val)
    }

    fn fused_sum(&self, xs: &[Var<'_>]) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let start = inner.wide_parents.len() as u32;
        inner.wide_parents.reserve(xs.len());
        inner.wide_partials.reserve(xs.len());
        let mut val = 0.0;
        for x in xs {
            val += x.val;
            inner.wide_parents.push(x.idx);
            inner.wide_partials.push(1.0);
        }
        self.finish_wide(&mut inner, start, val)
    }

    /// Reverse sweep from a single scalar output. Returns one adjoint per
    /// recorded node; inputs registered first occupy the leading slots.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        self.adjoints_seeded(&[(output, 1.0)])
    }

    /// Reverse sweep seeded at several nodes; used when the head of the loss
    /// is differentiated by hand and only the recorded subgraph is replayed.
    pub fn adjoints_seeded(&self, seeds: &[(Var<'_>, f64)]) -> Vec<f64> {
        let inner = self.inner.borrow();
        let n = inner.nodes.len();
        let mut adj = vec![0.0f64; n];
        for &(v, s) in seeds {
            adj[v.idx as usize] += s;
        }
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = inner.nodes[i];
            if node.parents[0] == WIDE {
                let (start, len) = inner.wide[node.parents[1] as usize];
                for k in start..start + len {
                    adj[inner.wide_parents[k as usize] as usize] +=
                        inner.wide_partials[k as usize] * a;
                }
            } else if node.parents[0] != WIDE - 1 {
                adj[node.parents[0] as usize] += node.partials[0] * a;
                adj[node.parents[1] as usize] += node.partials[1] * a;
            }
        }
        for &c in &inner.constants {
            adj[c as usize] = 0.0;
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.val
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }
}

/// Scalar arithmetic shared by plain `f64` evaluation and taped evaluation.
///
/// Model code is written once against this trait: instantiated at `f64` it is
/// a fast forward pass, instantiated at [`Var`] it records the operations
/// needed for one backward sweep. Branching (bin searches, clamps) must go
/// through [`Scalar::val`] so both instantiations take identical paths.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn val(self) -> f64;
    /// A constant carried on the same record as `self` (zero adjoint).
    fn constant_like(self, v: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn ln_gamma(self) -> Self;
    fn recip(self) -> Self;
    /// `lhs - self` without needing `Sub<Self> for f64`.
    fn rsub(self, lhs: f64) -> Self {
        -(self - lhs)
    }
    /// Clamp on the primal value; unit partial inside the interval, zero outside.
    fn clamp_val(self, lo: f64, hi: f64) -> Self;
    /// Inner product; the workhorse of dense conditioner layers.
    fn dot(a: &[Self], b: &[Self]) -> Self;
    /// Inner product against non-differentiable data.
    fn dot_data(w: &[Self], x: &[f64]) -> Self;
    fn sum(xs: &[Self]) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn constant_like(self, v: f64) -> Self {
        v
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn ln_gamma(self) -> Self {
        gamma::ln_gamma(self)
    }
    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
    #[inline]
    fn clamp_val(self, lo: f64, hi: f64) -> Self {
        self.clamp(lo, hi)
    }
    #[inline]
    fn dot(a: &[Self], b: &[Self]) -> Self {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    #[inline]
    fn dot_data(w: &[Self], x: &[f64]) -> Self {
        w.iter().zip(x).map(|(a, b)| a * b).sum()
    }
    #[inline]
    fn sum(xs: &[Self]) -> Self {
        xs.iter().sum()
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(self, rhs, 1.0, 1.0, self.val + rhs.val)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(self, rhs, 1.0, -1.0, self.val - rhs.val)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(self, rhs, rhs.val, self.val, self.val * rhs.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let inv = 1.0 / rhs.val;
        self.tape
            .binary(self, rhs, inv, -self.val * inv * inv, self.val * inv)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, 1.0, self.val + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, 1.0, self.val - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, rhs, self.val * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.tape.unary(self, 1.0 / rhs, self.val / rhs)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(self, -1.0, -self.val)
    }
}

impl<'t> Scalar for Var<'t> {
    fn val(self) -> f64 {
        self.val
    }

    fn constant_like(self, v: f64) -> Self {
        self.tape.constant(v)
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.tape.unary(self, e, e)
    }

    fn ln(self) -> Self {
        self.tape.unary(self, 1.0 / self.val, self.val.ln())
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.tape.unary(self, 0.5 / s, s)
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.tape.unary(self, 1.0 - t * t, t)
    }

    fn abs(self) -> Self {
        // subgradient 0 at the kink
        let d = if self.val > 0.0 {
            1.0
        } else if self.val < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.tape.unary(self, d, self.val.abs())
    }

    fn powi(self, n: i32) -> Self {
        let d = f64::from(n) * self.val.powi(n - 1);
        self.tape.unary(self, d, self.val.powi(n))
    }

    fn ln_gamma(self) -> Self {
        self.tape
            .unary(self, gamma::digamma(self.val), gamma::ln_gamma(self.val))
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.tape.unary(self, -r * r, r)
    }

    fn clamp_val(self, lo: f64, hi: f64) -> Self {
        let inside = self.val >= lo && self.val <= hi;
        self.tape
            .unary(self, if inside { 1.0 } else { 0.0 }, self.val.clamp(lo, hi))
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        assert_eq!(a.len(), b.len(), "dot operands must match");
        assert!(!a.is_empty(), "dot of empty slices has no tape context");
        if a.len() < 4 {
            let mut acc = a[0] * b[0];
            for k in 1..a.len() {
                acc = acc + a[k] * b[k];
            }
            return acc;
        }
        a[0].tape.fused_dot(a, b)
    }

    fn dot_data(w: &[Self], x: &[f64]) -> Self {
        assert_eq!(w.len(), x.len(), "dot operands must match");
        assert!(!w.is_empty(), "dot of empty slices has no tape context");
        w[0].tape.fused_dot_data(w, x)
    }

    fn sum(xs: &[Self]) -> Self {
        assert!(!xs.is_empty(), "sum of empty slice has no tape context");
        if xs.len() < 4 {
            let mut acc = xs[0];
            for x in &xs[1..] {
                acc = acc + *x;
            }
            return acc;
        }
        xs[0].tape.fused_sum(xs)
    }
}
