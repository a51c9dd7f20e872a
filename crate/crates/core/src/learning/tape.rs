//! Reverse-mode automatic differentiation on a Wengert list.
//!
//! Each recorded node stores its parent indices together with the local
//! partial derivatives evaluated during the forward pass. Reductions such as
//! dot products are recorded as one node, and the backward sweep is a single
//! reverse pass of multiply-adds.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::{sigmoid_f64, Real};

const NONE: u32 = u32::MAX;

/// Growable record of a computation.
///
/// Node `i` owns the entries `ends[i-1]..ends[i]`, each a parent index
/// with the local partial derivative. Independent variables own none.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

#[derive(Default)]
struct Inner {
    parents: Vec<u32>,
    partials: Vec<f64>,
    ends: Vec<u32>,
}

thread_local! {
    static SPARE: std::cell::Cell<Option<Inner>> = const { std::cell::Cell::new(None) };
}

impl Drop for Tape {
    fn drop(&mut self) {
        let mut inner = std::mem::take(self.inner.get_mut());
        inner.parents.clear();
        inner.partials.clear();
        inner.ends.clear();
        SPARE.with(|s| s.set(Some(inner)));
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves room for about `n` nodes. Buffers released by earlier
    /// tapes on this thread are reused.
    pub fn with_capacity(n: usize) -> Self {
        let mut inner = SPARE.with(|s| s.take()).unwrap_or_default();
        inner.parents.reserve(2 * n);
        inner.partials.reserve(2 * n);
        inner.ends.reserve(n);
        Self {
            inner: RefCell::new(inner),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        Var {
            tape: Some(self),
            idx: self.push(&[]),
            val: value,
        }
    }

    fn push(&self, entries: &[(u32, f64)]) -> u32 {
        let mut inner = self.inner.borrow_mut();
        for &(p, d) in entries {
            inner.parents.push(p);
            inner.partials.push(d);
        }
        let end = inner.parents.len();
        assert!(end < NONE as usize && inner.ends.len() < NONE as usize, "tape overflow");
        let idx = inner.ends.len() as u32;
        inner.ends.push(end as u32);
        idx
    }

    fn push_iter(&self, entries: impl Iterator<Item = (u32, f64)>) -> u32 {
        let mut inner = self.inner.borrow_mut();
        for (p, d) in entries {
            inner.parents.push(p);
            inner.partials.push(d);
        }
        let end = inner.parents.len();
        assert!(end < NONE as usize && inner.ends.len() < NONE as usize, "tape overflow");
        let idx = inner.ends.len() as u32;
        inner.ends.push(end as u32);
        idx
    }

    /// Adjoints of every node with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Adjoints {
        let inner = self.inner.borrow();
        let mut adj = vec![0.0; inner.ends.len()];
        let Some(tape) = output.tape else {
            return Adjoints { adj };
        };
        assert!(std::ptr::eq(tape, self), "output recorded on another tape");
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let lo = if i == 0 { 0 } else { inner.ends[i - 1] as usize };
            let hi = inner.ends[i] as usize;
            for k in lo..hi {
                adj[inner.parents[k] as usize] += a * inner.partials[k];
            }
        }
        Adjoints { adj }
    }
}

/// Result of a backward sweep.
pub struct Adjoints {
    adj: Vec<f64>,
}

impl Adjoints {
    /// Derivative of the output with respect to `v` (zero for constants).
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        if v.tape.is_none() {
            return 0.0;
        }
        self.adj[v.idx as usize]
    }
}

/// A scalar that is either a tape node or a derivative-free constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var#{}({})", self.idx, self.val),
            None => write!(f, "Const({})", self.val),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Var {
            tape: None,
            idx: NONE,
            val,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Var::constant(val),
            Some(t) => {
                let idx = t.push(&[(self.idx, d)]);
                Var {
                    tape: Some(t),
                    idx,
                    val,
                }
            }
        }
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        match (self.tape, other.tape) {
            (None, None) => Var::constant(val),
            (Some(t), None) => self.unary_on(t, val, da),
            (None, Some(t)) => other.unary_on(t, val, db),
            (Some(t), Some(_)) => {
                let idx = t.push(&[(self.idx, da), (other.idx, db)]);
                Var {
                    tape: Some(t),
                    idx,
                    val,
                }
            }
        }
    }

    fn unary_on(self, t: &'t Tape, val: f64, d: f64) -> Self {
        let idx = t.push(&[(self.idx, d)]);
        Var {
            tape: Some(t),
            idx,
            val,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        self.binary(rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(self) -> f64 {
        self.val
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }

    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }

    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }

    fn tan(self) -> Self {
        let t = self.val.tan();
        self.unary(t, 1.0 + t * t)
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn atan(self) -> Self {
        self.unary(self.val.atan(), 1.0 / (1.0 + self.val * self.val))
    }

    fn atanh(self) -> Self {
        self.unary(self.val.atanh(), 1.0 / (1.0 - self.val * self.val))
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.val);
        self.unary(s, s * (1.0 - s))
    }

    fn leaky_relu(self, slope: f64) -> Self {
        if self.val > 0.0 {
            self
        } else {
            self.unary(slope * self.val, slope)
        }
    }

    fn dot_slice(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut val = 0.0;
        for (x, y) in a.iter().zip(b) {
            val += x.val * y.val;
        }
        let Some(t) = a.iter().chain(b).find_map(|v| v.tape) else {
            return Var::constant(val);
        };
        let mut inner = t.inner.borrow_mut();
        inner.parents.reserve(2 * a.len());
        inner.partials.reserve(2 * a.len());
        for (x, y) in a.iter().zip(b) {
            if x.tape.is_some() {
                inner.parents.push(x.idx);
                inner.partials.push(y.val);
            }
            if y.tape.is_some() {
                inner.parents.push(y.idx);
                inner.partials.push(x.val);
            }
        }
        let end = inner.parents.len();
        assert!(end < NONE as usize && inner.ends.len() < NONE as usize, "tape overflow");
        let idx = inner.ends.len() as u32;
        inner.ends.push(end as u32);
        Var {
            tape: Some(t),
            idx,
            val,
        }
    }

    fn sum_slice(a: &[Self]) -> Self {
        let val = a.iter().map(|x| x.val).sum();
        let Some(t) = a.iter().find_map(|v| v.tape) else {
            return Var::constant(val);
        };
        let entries = a.iter().filter(|x| x.tape.is_some()).map(|x| (x.idx, 1.0));
        Var {
            tape: Some(t),
            idx: t.push_iter(entries),
            val,
        }
    }
}
