//! Reverse-mode automatic differentiation on a scalar tape.
//!
//! Nodes are appended in creation order, which is a topological order, so a
//! single reverse sweep accumulates every adjoint. Each node lists its parents
//! with local partial derivatives in a shared edge arena; most nodes have one
//! or two parents, fused kernels may have many.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    len: u32,
}

#[derive(Default)]
struct Inner {
    values: Vec<f64>,
    nodes: Vec<Node>,
    edges: Vec<(u32, f64)>,
}

#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        write!(f, "Tape({} nodes, {} edges)", inner.nodes.len(), inner.edges.len())
    }
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.idx, self.value)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: f64, parents: impl IntoIterator<Item = (u32, f64)>) -> Var<'_> {
        let mut inner = self.inner.borrow_mut();
        let start = inner.edges.len() as u32;
        inner.edges.extend(parents);
        let len = inner.edges.len() as u32 - start;
        let idx = inner.nodes.len() as u32;
        inner.nodes.push(Node { start, len });
        inner.values.push(value);
        Var { tape: self, idx, value }
    }

    /// A leaf whose adjoint is reported by [`Gradients::wrt`].
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(value, [])
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(value, [])
    }

    /// A node with externally computed value and partials ∂value/∂parent.
    pub fn custom<'t>(&'t self, value: f64, parents: &[Var<'t>], partials: &[f64]) -> Var<'t> {
        assert_eq!(parents.len(), partials.len(), "one partial per parent");
        self.push(value, parents.iter().zip(partials).map(|(p, &d)| (p.idx, d)))
    }

    /// Like [`Tape::custom`] with parents given as (var, partial) pairs.
    pub fn custom_pairs<'t>(&'t self, value: f64, pairs: impl IntoIterator<Item = (Var<'t>, f64)>) -> Var<'t> {
        self.push(value, pairs.into_iter().map(|(p, d)| (p.idx, d)))
    }

    pub fn sum<'t>(&'t self, terms: &[Var<'t>]) -> Var<'t> {
        let value = terms.iter().map(|t| t.value).sum();
        self.push(value, terms.iter().map(|t| (t.idx, 1.0)))
    }

    /// Σ w_i x_i with constant weights.
    pub fn dot_const<'t>(&'t self, xs: &[Var<'t>], weights: &[f64]) -> Var<'t> {
        assert_eq!(xs.len(), weights.len());
        let value = xs.iter().zip(weights).map(|(x, w)| x.value * w).sum();
        self.push(value, xs.iter().zip(weights).map(|(x, &w)| (x.idx, w)))
    }

    /// Σ a_i b_i for two var vectors.
    pub fn dot<'t>(&'t self, a: &[Var<'t>], b: &[Var<'t>]) -> Var<'t> {
        assert_eq!(a.len(), b.len());
        let value = a.iter().zip(b).map(|(x, y)| x.value * y.value).sum();
        let edges: Vec<(u32, f64)> =
            a.iter().zip(b).flat_map(|(x, y)| [(x.idx, y.value), (y.idx, x.value)]).collect();
        self.push(value, edges)
    }

    pub fn backward(&self, output: Var<'_>) -> Gradients {
        assert!(std::ptr::eq(self, output.tape), "output belongs to a different tape");
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; output.idx as usize + 1];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = inner.nodes[i];
            for &(p, d) in &inner.edges[node.start as usize..(node.start + node.len) as usize] {
                adj[p as usize] += a * d;
            }
        }
        Gradients { adj }
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    adj: Vec<f64>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.adj.get(v.idx as usize).copied().unwrap_or(0.0)
    }

    pub fn wrt_all(&self, vs: &[Var<'_>]) -> Vec<f64> {
        vs.iter().map(|v| self.wrt(*v)).collect()
    }
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    fn unary(self, value: f64, d: f64) -> Var<'t> {
        self.tape.push(value, [(self.idx, d)])
    }

    fn binary(self, other: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        self.tape.push(value, [(self.idx, da), (other.idx, db)])
    }

    pub fn exp(self) -> Var<'t> {
        let v = self.value.exp();
        self.unary(v, v)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    pub fn sqrt(self) -> Var<'t> {
        let v = self.value.sqrt();
        self.unary(v, 0.5 / v)
    }

    pub fn tanh(self) -> Var<'t> {
        let v = self.value.tanh();
        self.unary(v, 1.0 - v * v)
    }

    pub fn sigmoid(self) -> Var<'t> {
        let v = sigmoid(self.value);
        self.unary(v, v * (1.0 - v))
    }

    pub fn softplus(self) -> Var<'t> {
        let x = self.value;
        let v = if x > 30.0 { x } else { x.exp().ln_1p() };
        self.unary(v, sigmoid(x))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(self.value * self.value, 2.0 * self.value)
    }

    pub fn powi(self, n: i32) -> Var<'t> {
        self.unary(self.value.powi(n), n as f64 * self.value.powi(n - 1))
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        self.unary(self.value.powf(p), p * self.value.powf(p - 1.0))
    }

    /// |x|, with derivative 0 at the kink.
    pub fn abs(self) -> Var<'t> {
        self.unary(self.value.abs(), if self.value > 0.0 { 1.0 } else if self.value < 0.0 { -1.0 } else { 0.0 })
    }

    /// max(x, floor), passing no gradient when clipped.
    pub fn clamp_min(self, floor: f64) -> Var<'t> {
        if self.value >= floor {
            self
        } else {
            self.tape.constant(floor)
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value + o.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value - o.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.value * o.value, o.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let q = self.value / o.value;
        self.binary(o, q, 1.0 / o.value, -q / o.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(self.value + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.unary(self.value - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(self.value * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        self.unary(self.value / c, 1.0 / c)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, v: Var<'t>) -> Var<'t> {
        v + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        v.unary(self - v.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, v: Var<'t>) -> Var<'t> {
        let q = self / v.value;
        v.unary(q, -q / v.value)
    }
}
