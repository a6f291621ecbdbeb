//! Tape builder and differentiable adjoint-graph construction.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::program::{Op, Program};
use crate::scalar::{c, Scalar};

/// Single-writer recording tape. Freeze with [`Tape::finish`] to obtain a
/// shareable [`Program`].
#[derive(Debug)]
pub struct Tape<T> {
    inner: RefCell<Program<T>>,
}

/// Handle to a node on a tape. `Copy`, so expressions read naturally.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    pub id: u32,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(Program {
                ops: Vec::new(),
                dot_pairs: Vec::new(),
                dot_linear: Vec::new(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op<T>) -> Var<'_, T> {
        let mut g = self.inner.borrow_mut();
        let id = g.ops.len() as u32;
        g.ops.push(op);
        Var { tape: self, id }
    }

    /// Externally bound slot.
    pub fn input(&self) -> Var<'_, T> {
        self.push(Op::Input)
    }

    pub fn inputs(&self, n: usize) -> Vec<Var<'_, T>> {
        (0..n).map(|_| self.input()).collect()
    }

    pub fn constant(&self, x: T) -> Var<'_, T> {
        self.push(Op::Const(x))
    }

    /// Σ pairs + Σ coef·node + c0 as a single fused node.
    pub fn dot(&self, pairs: &[(Var<'_, T>, Var<'_, T>)], linear: &[(T, Var<'_, T>)], c0: T) -> Var<'_, T> {
        let mut g = self.inner.borrow_mut();
        let p0 = g.dot_pairs.len() as u32;
        g.dot_pairs.extend(pairs.iter().map(|&(a, b)| (a.id, b.id)));
        let p1 = g.dot_pairs.len() as u32;
        let l0 = g.dot_linear.len() as u32;
        g.dot_linear.extend(linear.iter().map(|&(cf, v)| (cf, v.id)));
        let l1 = g.dot_linear.len() as u32;
        let id = g.ops.len() as u32;
        g.ops.push(Op::Dot {
            pairs: (p0, p1),
            linear: (l0, l1),
            c0,
        });
        Var { tape: self, id }
    }

    /// Freezes the tape into an immutable program.
    pub fn finish(self) -> Program<T> {
        self.inner.into_inner()
    }

    /// Appends the reverse-accumulation adjoint of `output` with respect to
    /// `wrt` *as tape nodes*, returning one derivative node per entry of
    /// `wrt`. Because the adjoint is expressed in the same primitive set, the
    /// returned nodes can be differentiated again (nested/second
    /// derivatives) or fed into further computation.
    pub fn adjoint(&self, output: Var<'_, T>, wrt: &[Var<'_, T>]) -> Vec<Var<'_, T>> {
        #[derive(Clone, Copy)]
        enum Partial<T> {
            Node(u32),
            Coef(T),
        }
        struct Term<T> {
            adj: u32,
            partial: Partial<T>,
        }

        let top = output.id as usize;
        // Activity mask: nodes whose value depends on some `wrt` variable.
        let mut active = vec![false; top + 1];
        for w in wrt {
            debug_assert!((w.id as usize) <= top || {
                // A wrt node above the output has zero derivative; tolerated.
                true
            });
            if (w.id as usize) < active.len() {
                active[w.id as usize] = true;
            }
        }
        {
            let g = self.inner.borrow();
            for i in 0..=top {
                if active[i] {
                    continue;
                }
                let dep = |a: u32| active[a as usize];
                active[i] = match g.ops[i] {
                    Op::Input | Op::Const(_) => false,
                    Op::Add(a, b)
                    | Op::Sub(a, b)
                    | Op::Mul(a, b)
                    | Op::Div(a, b)
                    | Op::Max(a, b)
                    | Op::Min(a, b)
                    | Op::GtStep(a, b) => dep(a) || dep(b),
                    Op::Neg(a)
                    | Op::Recip(a)
                    | Op::Sqrt(a)
                    | Op::Exp(a)
                    | Op::Ln(a)
                    | Op::Softplus(a)
                    | Op::Sigmoid(a)
                    | Op::Tanh(a)
                    | Op::Relu(a)
                    | Op::StepGt0(a)
                    | Op::Abs(a)
                    | Op::Sign(a) => dep(a),
                    Op::Axpb { x, .. }
                    | Op::ExpCap { x, .. }
                    | Op::ExpCapD { x, .. }
                    | Op::StepLt { x, .. }
                    | Op::PowC { x, .. } => dep(x),
                    Op::Dot { pairs, linear, .. } => {
                        g.dot_pairs[pairs.0 as usize..pairs.1 as usize]
                            .iter()
                            .any(|&(a, b)| dep(a) || dep(b))
                            || g.dot_linear[linear.0 as usize..linear.1 as usize]
                                .iter()
                                .any(|&(_, k)| dep(k))
                    }
                };
            }
        }

        let mut contribs: Vec<Vec<Term<T>>> = Vec::new();
        contribs.resize_with(top + 1, Vec::new);
        let one = self.constant(T::one());
        let mut adj_of = vec![u32::MAX; top + 1];
        adj_of[top] = one.id;

        for i in (0..=top).rev() {
            if !active[i] {
                continue;
            }
            // Materialize this node's adjoint from collected terms.
            if adj_of[i] == u32::MAX {
                let terms = std::mem::take(&mut contribs[i]);
                if terms.is_empty() {
                    continue; // not an ancestor of the output
                }
                let mut pairs = Vec::new();
                let mut linear = Vec::new();
                for t in &terms {
                    let adj = Var { tape: self, id: t.adj };
                    match t.partial {
                        Partial::Node(n) => pairs.push((adj, Var { tape: self, id: n })),
                        Partial::Coef(cf) => linear.push((cf, adj)),
                    }
                }
                adj_of[i] = self.dot(&pairs, &linear, T::zero()).id;
            }
            let adj_i = adj_of[i];
            let this = Var {
                tape: self,
                id: i as u32,
            };

            // Push contributions to active parents; partials are built as nodes.
            let op = self.inner.borrow().ops[i].clone();
            let send = |parent: u32, partial: Partial<T>, contribs: &mut Vec<Vec<Term<T>>>| {
                if active[parent as usize] {
                    contribs[parent as usize].push(Term { adj: adj_i, partial });
                }
            };
            match op {
                Op::Input | Op::Const(_) | Op::StepLt { .. } | Op::StepGt0(_) | Op::Sign(_) => {}
                Op::GtStep(_, _) => {}
                Op::Add(a, b) => {
                    send(a, Partial::Coef(T::one()), &mut contribs);
                    send(b, Partial::Coef(T::one()), &mut contribs);
                }
                Op::Sub(a, b) => {
                    send(a, Partial::Coef(T::one()), &mut contribs);
                    send(b, Partial::Coef(-T::one()), &mut contribs);
                }
                Op::Mul(a, b) => {
                    send(a, Partial::Node(b), &mut contribs);
                    send(b, Partial::Node(a), &mut contribs);
                }
                Op::Div(a, b) => {
                    let vb = Var { tape: self, id: b };
                    if active[a as usize] {
                        let r = self.push(Op::Recip(b));
                        send(a, Partial::Node(r.id), &mut contribs);
                    }
                    if active[b as usize] {
                        let d = -(this / vb);
                        send(b, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Neg(a) => send(a, Partial::Coef(-T::one()), &mut contribs),
                Op::Recip(a) => {
                    if active[a as usize] {
                        let d = -(this * this);
                        send(a, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Axpb { x, a, .. } => send(x, Partial::Coef(a), &mut contribs),
                Op::Sqrt(a) => {
                    if active[a as usize] {
                        let r = self.push(Op::Recip(i as u32));
                        let d = r.scale(c(0.5));
                        send(a, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Exp(a) => send(a, Partial::Node(i as u32), &mut contribs),
                Op::Ln(a) => {
                    if active[a as usize] {
                        let r = self.push(Op::Recip(a));
                        send(a, Partial::Node(r.id), &mut contribs);
                    }
                }
                Op::ExpCap { x, cap } => {
                    if active[x as usize] {
                        let d = self.push(Op::ExpCapD { x, cap });
                        send(x, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::ExpCapD { x, cap } => {
                    if active[x as usize] {
                        let gate = self.push(Op::StepLt { x, cap });
                        let d = this * gate;
                        send(x, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::PowC { x, p } => {
                    if active[x as usize] {
                        let pw = self.push(Op::PowC { x, p: p - T::one() });
                        let d = pw.scale(p);
                        send(x, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Softplus(a) => {
                    if active[a as usize] {
                        let s = self.push(Op::Sigmoid(a));
                        send(a, Partial::Node(s.id), &mut contribs);
                    }
                }
                Op::Sigmoid(a) => {
                    if active[a as usize] {
                        let d = this * this.axpb(-T::one(), T::one());
                        send(a, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Tanh(a) => {
                    if active[a as usize] {
                        let d = (this * this).axpb(-T::one(), T::one());
                        send(a, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Relu(a) => {
                    if active[a as usize] {
                        let d = self.push(Op::StepGt0(a));
                        send(a, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Abs(a) => {
                    if active[a as usize] {
                        let d = self.push(Op::Sign(a));
                        send(a, Partial::Node(d.id), &mut contribs);
                    }
                }
                Op::Max(a, b) => {
                    let g = self.push(Op::GtStep(a, b));
                    send(a, Partial::Node(g.id), &mut contribs);
                    let gb = g.axpb(-T::one(), T::one());
                    send(b, Partial::Node(gb.id), &mut contribs);
                }
                Op::Min(a, b) => {
                    let g = self.push(Op::GtStep(b, a));
                    send(a, Partial::Node(g.id), &mut contribs);
                    let gb = g.axpb(-T::one(), T::one());
                    send(b, Partial::Node(gb.id), &mut contribs);
                }
                Op::Dot { pairs, linear, .. } => {
                    let (pr, lr) = {
                        let g = self.inner.borrow();
                        (
                            g.dot_pairs[pairs.0 as usize..pairs.1 as usize].to_vec(),
                            g.dot_linear[linear.0 as usize..linear.1 as usize].to_vec(),
                        )
                    };
                    for (a, b) in pr {
                        send(a, Partial::Node(b), &mut contribs);
                        send(b, Partial::Node(a), &mut contribs);
                    }
                    for (cf, k) in lr {
                        send(k, Partial::Coef(cf), &mut contribs);
                    }
                }
            }
        }

        // Derivative of the output w.r.t. nodes that never received a
        // contribution (or are not ancestors) is exactly zero.
        let zero = self.constant(T::zero());
        wrt.iter()
            .map(|w| {
                let id = if (w.id as usize) <= top {
                    adj_of[w.id as usize]
                } else {
                    u32::MAX
                };
                if id == u32::MAX {
                    zero
                } else {
                    Var { tape: self, id }
                }
            })
            .collect()
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    fn unary(self, f: impl FnOnce(u32) -> Op<T>) -> Var<'t, T> {
        self.tape.push(f(self.id))
    }

    fn binary(self, rhs: Var<'t, T>, f: impl FnOnce(u32, u32) -> Op<T>) -> Var<'t, T> {
        self.tape.push(f(self.id, rhs.id))
    }

    pub fn recip(self) -> Var<'t, T> {
        self.unary(Op::Recip)
    }

    pub fn sqrt(self) -> Var<'t, T> {
        self.unary(Op::Sqrt)
    }

    pub fn exp(self) -> Var<'t, T> {
        self.unary(Op::Exp)
    }

    pub fn ln(self) -> Var<'t, T> {
        self.unary(Op::Ln)
    }

    /// Convex overflow-safe exponential activation (linear above `cap`).
    pub fn exp_capped(self, cap: T) -> Var<'t, T> {
        self.unary(|x| Op::ExpCap { x, cap })
    }

    pub fn powf(self, p: T) -> Var<'t, T> {
        self.unary(|x| Op::PowC { x, p })
    }

    pub fn softplus(self) -> Var<'t, T> {
        self.unary(Op::Softplus)
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        self.unary(Op::Sigmoid)
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.unary(Op::Tanh)
    }

    pub fn relu(self) -> Var<'t, T> {
        self.unary(Op::Relu)
    }

    pub fn abs(self) -> Var<'t, T> {
        self.unary(Op::Abs)
    }

    pub fn max(self, rhs: Var<'t, T>) -> Var<'t, T> {
        self.binary(rhs, Op::Max)
    }

    pub fn min(self, rhs: Var<'t, T>) -> Var<'t, T> {
        self.binary(rhs, Op::Min)
    }

    /// a·self + b with constant coefficients (single node).
    pub fn axpb(self, a: T, b: T) -> Var<'t, T> {
        self.unary(|x| Op::Axpb { x, a, b })
    }

    pub fn scale(self, a: T) -> Var<'t, T> {
        self.axpb(a, T::zero())
    }

    pub fn square(self) -> Var<'t, T> {
        self * self
    }

    /// GELU in its tanh form, composed from primitives so nested derivatives
    /// stay exact.
    pub fn gelu(self) -> Var<'t, T> {
        let k: T = c(0.7978845608028654); // sqrt(2/pi)
        let a: T = c(0.044715);
        let x3 = self * self * self;
        let inner = (self + x3.scale(a)).scale(k);
        let t = inner.tanh().axpb(c(0.5), c(0.5));
        self * t
    }
}

impl<'t, T: Scalar> Add for Var<'t, T> {
    type Output = Var<'t, T>;
    fn add(self, rhs: Self) -> Self::Output {
        self.binary(rhs, Op::Add)
    }
}

impl<'t, T: Scalar> Sub for Var<'t, T> {
    type Output = Var<'t, T>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.binary(rhs, Op::Sub)
    }
}

impl<'t, T: Scalar> Mul for Var<'t, T> {
    type Output = Var<'t, T>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.binary(rhs, Op::Mul)
    }
}

impl<'t, T: Scalar> Div for Var<'t, T> {
    type Output = Var<'t, T>;
    fn div(self, rhs: Self) -> Self::Output {
        self.binary(rhs, Op::Div)
    }
}

impl<'t, T: Scalar> Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Self::Output {
        self.unary(Op::Neg)
    }
}
