//! Frozen, replayable computation programs.
//!
//! A [`Program`] is the immutable form of a recorded tape: an append-only
//! list of primitive operations in topological order (each node's parents
//! precede it). Values live in a separate [`Workspace`] so one program can be
//! shared across threads, each worker replaying it into its own buffers.

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Primitive operation. Node ids are indices into the program's node list.
#[derive(Debug, Clone)]
pub(crate) enum Op<T> {
    /// Externally bound slot; `forward` leaves its value untouched.
    Input,
    Const(T),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Recip(u32),
    /// a·x + b with constant a, b.
    Axpb { x: u32, a: T, b: T },
    Sqrt(u32),
    Exp(u32),
    Ln(u32),
    /// exp with linear extension above `cap` (overflow-safe convex activation).
    ExpCap { x: u32, cap: T },
    /// Derivative of `ExpCap`.
    ExpCapD { x: u32, cap: T },
    /// 1 if x < cap else 0.
    StepLt { x: u32, cap: T },
    /// x^p with constant exponent.
    PowC { x: u32, p: T },
    Softplus(u32),
    Sigmoid(u32),
    Tanh(u32),
    Relu(u32),
    /// 1 if x > 0 else 0 (relu subgradient; 0 at the kink).
    StepGt0(u32),
    Abs(u32),
    /// -1, 0, +1.
    Sign(u32),
    /// Ties take the second argument (relu(x) = max(x, 0) has derivative 0 at 0).
    Max(u32, u32),
    Min(u32, u32),
    /// 1 if a > b else 0.
    GtStep(u32, u32),
    /// Σ v[i]·v[j] over `pairs` + Σ c·v[k] over `linear` + c0.
    /// Ranges index into the program's dot arenas.
    Dot {
        pairs: (u32, u32),
        linear: (u32, u32),
        c0: T,
    },
}

/// Frozen computation graph. Cheap to share (`&Program` is `Sync`).
#[derive(Debug, Clone)]
pub struct Program<T> {
    pub(crate) ops: Vec<Op<T>>,
    pub(crate) dot_pairs: Vec<(u32, u32)>,
    pub(crate) dot_linear: Vec<(T, u32)>,
}

/// Per-worker value/adjoint buffers for replaying a [`Program`].
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    pub values: Vec<T>,
    pub adjoints: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn value(&self, id: u32) -> T {
        self.values[id as usize]
    }

    pub fn adjoint(&self, id: u32) -> T {
        self.adjoints[id as usize]
    }

    pub fn bind(&mut self, id: u32, x: T) {
        self.values[id as usize] = x;
    }
}

impl<T: Scalar> Program<T> {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn workspace(&self) -> Workspace<T> {
        Workspace {
            values: vec![T::zero(); self.ops.len()],
            adjoints: vec![T::zero(); self.ops.len()],
        }
    }

    /// Replays all non-input nodes into `ws.values`. Input slots must have
    /// been bound beforehand. Replaying twice with the same bindings
    /// reproduces the recorded values bit-exactly.
    pub fn forward(&self, ws: &mut Workspace<T>) -> Result<()> {
        debug_assert_eq!(ws.values.len(), self.ops.len());
        let v = &mut ws.values;
        for (i, op) in self.ops.iter().enumerate() {
            let y = match *op {
                Op::Input => continue,
                Op::Const(c) => c,
                Op::Add(a, b) => v[a as usize] + v[b as usize],
                Op::Sub(a, b) => v[a as usize] - v[b as usize],
                Op::Mul(a, b) => v[a as usize] * v[b as usize],
                Op::Div(a, b) => v[a as usize] / v[b as usize],
                Op::Neg(a) => -v[a as usize],
                Op::Recip(a) => T::one() / v[a as usize],
                Op::Axpb { x, a, b } => a * v[x as usize] + b,
                Op::Sqrt(a) => {
                    let x = v[a as usize];
                    if x < T::zero() {
                        return Err(Error::domain("sqrt", format!("negative argument {x}")));
                    }
                    x.sqrt()
                }
                Op::Exp(a) => v[a as usize].exp(),
                Op::Ln(a) => {
                    let x = v[a as usize];
                    if x <= T::zero() {
                        return Err(Error::domain("ln", format!("non-positive argument {x}")));
                    }
                    x.ln()
                }
                Op::ExpCap { x, cap } => scalar::exp_capped(v[x as usize], cap),
                Op::ExpCapD { x, cap } => scalar::exp_capped_deriv(v[x as usize], cap),
                Op::StepLt { x, cap } => {
                    if v[x as usize] < cap {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                Op::PowC { x, p } => v[x as usize].powf(p),
                Op::Softplus(a) => scalar::softplus(v[a as usize]),
                Op::Sigmoid(a) => scalar::sigmoid(v[a as usize]),
                Op::Tanh(a) => v[a as usize].tanh(),
                Op::Relu(a) => v[a as usize].max(T::zero()),
                Op::StepGt0(a) => {
                    if v[a as usize] > T::zero() {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                Op::Abs(a) => v[a as usize].abs(),
                Op::Sign(a) => {
                    let x = v[a as usize];
                    if x > T::zero() {
                        T::one()
                    } else if x < T::zero() {
                        -T::one()
                    } else {
                        T::zero()
                    }
                }
                Op::Max(a, b) => {
                    let (x, y) = (v[a as usize], v[b as usize]);
                    if x > y {
                        x
                    } else {
                        y
                    }
                }
                Op::Min(a, b) => {
                    let (x, y) = (v[a as usize], v[b as usize]);
                    if x < y {
                        x
                    } else {
                        y
                    }
                }
                Op::GtStep(a, b) => {
                    if v[a as usize] > v[b as usize] {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                Op::Dot { pairs, linear, c0 } => {
                    let mut acc = c0;
                    for &(p, q) in &self.dot_pairs[pairs.0 as usize..pairs.1 as usize] {
                        acc = acc + v[p as usize] * v[q as usize];
                    }
                    for &(c, k) in &self.dot_linear[linear.0 as usize..linear.1 as usize] {
                        acc = acc + c * v[k as usize];
                    }
                    acc
                }
            };
            v[i] = y;
        }
        Ok(())
    }

    /// Reverse accumulation over the recorded values.
    ///
    /// Clears `ws.adjoints`, seeds the given nodes, and propagates in reverse
    /// topological order. Afterwards `ws.adjoints[i]` holds
    /// `Σ_seeds seed·∂(seed node)/∂(node i)`.
    pub fn backward(&self, ws: &mut Workspace<T>, seeds: &[(u32, T)]) {
        for a in ws.adjoints.iter_mut() {
            *a = T::zero();
        }
        let mut top = 0usize;
        for &(id, s) in seeds {
            ws.adjoints[id as usize] = ws.adjoints[id as usize] + s;
            top = top.max(id as usize);
        }
        let v = &ws.values;
        let adj = &mut ws.adjoints;
        let zero = T::zero();
        for i in (0..=top).rev() {
            let a = adj[i];
            if a == zero {
                continue;
            }
            match self.ops[i] {
                Op::Input | Op::Const(_) | Op::StepLt { .. } | Op::StepGt0(_) | Op::Sign(_) => {}
                Op::GtStep(_, _) => {}
                Op::Add(p, q) => {
                    adj[p as usize] = adj[p as usize] + a;
                    adj[q as usize] = adj[q as usize] + a;
                }
                Op::Sub(p, q) => {
                    adj[p as usize] = adj[p as usize] + a;
                    adj[q as usize] = adj[q as usize] - a;
                }
                Op::Mul(p, q) => {
                    adj[p as usize] = adj[p as usize] + a * v[q as usize];
                    adj[q as usize] = adj[q as usize] + a * v[p as usize];
                }
                Op::Div(p, q) => {
                    let vq = v[q as usize];
                    adj[p as usize] = adj[p as usize] + a / vq;
                    adj[q as usize] = adj[q as usize] - a * v[i] / vq;
                }
                Op::Neg(p) => adj[p as usize] = adj[p as usize] - a,
                Op::Recip(p) => {
                    adj[p as usize] = adj[p as usize] - a * v[i] * v[i];
                }
                Op::Axpb { x, a: ca, .. } => {
                    adj[x as usize] = adj[x as usize] + a * ca;
                }
                Op::Sqrt(p) => {
                    let half = T::from_f64(0.5).unwrap();
                    adj[p as usize] = adj[p as usize] + a * half / v[i];
                }
                Op::Exp(p) => adj[p as usize] = adj[p as usize] + a * v[i],
                Op::Ln(p) => adj[p as usize] = adj[p as usize] + a / v[p as usize],
                Op::ExpCap { x, cap } => {
                    adj[x as usize] =
                        adj[x as usize] + a * scalar::exp_capped_deriv(v[x as usize], cap);
                }
                Op::ExpCapD { x, cap } => {
                    let d = if v[x as usize] < cap { v[i] } else { T::zero() };
                    adj[x as usize] = adj[x as usize] + a * d;
                }
                Op::PowC { x, p } => {
                    let d = p * v[x as usize].powf(p - T::one());
                    adj[x as usize] = adj[x as usize] + a * d;
                }
                Op::Softplus(p) => {
                    adj[p as usize] = adj[p as usize] + a * scalar::sigmoid(v[p as usize]);
                }
                Op::Sigmoid(p) => {
                    let s = v[i];
                    adj[p as usize] = adj[p as usize] + a * s * (T::one() - s);
                }
                Op::Tanh(p) => {
                    let t = v[i];
                    adj[p as usize] = adj[p as usize] + a * (T::one() - t * t);
                }
                Op::Relu(p) => {
                    if v[p as usize] > zero {
                        adj[p as usize] = adj[p as usize] + a;
                    }
                }
                Op::Abs(p) => {
                    let x = v[p as usize];
                    if x > zero {
                        adj[p as usize] = adj[p as usize] + a;
                    } else if x < zero {
                        adj[p as usize] = adj[p as usize] - a;
                    }
                }
                Op::Max(p, q) => {
                    if v[p as usize] > v[q as usize] {
                        adj[p as usize] = adj[p as usize] + a;
                    } else {
                        adj[q as usize] = adj[q as usize] + a;
                    }
                }
                Op::Min(p, q) => {
                    if v[p as usize] < v[q as usize] {
                        adj[p as usize] = adj[p as usize] + a;
                    } else {
                        adj[q as usize] = adj[q as usize] + a;
                    }
                }
                Op::Dot { pairs, linear, .. } => {
                    for &(p, q) in &self.dot_pairs[pairs.0 as usize..pairs.1 as usize] {
                        adj[p as usize] = adj[p as usize] + a * v[q as usize];
                        adj[q as usize] = adj[q as usize] + a * v[p as usize];
                    }
                    for &(c, k) in &self.dot_linear[linear.0 as usize..linear.1 as usize] {
                        adj[k as usize] = adj[k as usize] + a * c;
                    }
                }
            }
        }
    }
}
