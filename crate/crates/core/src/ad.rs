//! Automatic differentiation: a tape for reverse-mode gradients, generic over
//! its value type so that running the tape on dual numbers yields exact
//! Hessian columns (forward-over-reverse). Model code is written once against
//! the [`Scalar`] trait and works unchanged for plain `f64`, dual numbers,
//! tape variables, and tape variables carrying duals.
//!
//! Control flow branches on primal values via [`Scalar::value`]; the tape
//! records whichever branch was taken, so derivatives are one-sided at kinks.
//! Domain violations (log of a nonpositive value, sqrt of a negative value,
//! division by zero) poison the tape and surface as `Error::DomainError`.

use std::cell::{Cell, RefCell};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const NONE_IDX: u32 = u32::MAX;

/// Arithmetic interface shared by `f64`, [`Dual`] and [`Var`].
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Primal value, used for branching; never differentiable.
    fn value(self) -> f64;
    fn is_zero(self) -> bool;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;

    fn powi(self, n: i32) -> Self {
        match n {
            0 => Self::constant(1.0),
            1 => self,
            _ if n < 0 => Self::constant(1.0) / self.powi(-n),
            _ => {
                // n >= 2
                let half = self.powi(n / 2);
                if n % 2 == 0 {
                    half * half
                } else {
                    half * half * self
                }
            }
        }
    }

    /// Numerically stable logistic 1 / (1 + exp(-x)).
    fn inv_logit(self) -> Self {
        let one = Self::constant(1.0);
        if self.value() >= 0.0 {
            one / (one + (-self).exp())
        } else {
            let e = self.exp();
            e / (one + e)
        }
    }

    /// Smooth surrogate for max(-x, 0): (sqrt(x^2 + eps) - x) / 2.
    /// Everywhere differentiable; tends to the negative part as eps -> 0.
    fn smooth_neg(self, eps: f64) -> Self {
        Self::constant(0.5) * ((self * self + Self::constant(eps)).sqrt() - self)
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// First-order dual number: value plus one tangent component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub dx: f64,
}

impl Dual {
    pub fn new(re: f64, dx: f64) -> Self {
        Dual { re, dx }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, r: Dual) -> Dual {
        Dual::new(self.re + r.re, self.dx + r.dx)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, r: Dual) -> Dual {
        Dual::new(self.re - r.re, self.dx - r.dx)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, r: Dual) -> Dual {
        Dual::new(self.re * r.re, self.dx * r.re + self.re * r.dx)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, r: Dual) -> Dual {
        let inv = 1.0 / r.re;
        Dual::new(self.re * inv, (self.dx - self.re * inv * r.dx) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.dx)
    }
}

impl Scalar for Dual {
    fn constant(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    fn value(self) -> f64 {
        self.re
    }
    fn is_zero(self) -> bool {
        self.re == 0.0 && self.dx == 0.0
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, e * self.dx)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.dx / self.re)
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.re.cos() * self.dx)
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.re.sin() * self.dx)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, 0.5 / s * self.dx)
    }
}

#[derive(Clone, Copy)]
struct Node<T> {
    parent: [u32; 2],
    weight: [T; 2],
}

/// Record of one forward evaluation. Rebuilt for every gradient or Hessian
/// sweep; no tape reuse across evaluations.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    poisoned: Cell<bool>,
    poison_msg: RefCell<Option<String>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(1024)),
            poisoned: Cell::new(false),
            poison_msg: RefCell::new(None),
        }
    }

    pub fn input(&self, v: T) -> Var<'_, T> {
        let idx = self.push(NONE_IDX, T::constant(0.0), NONE_IDX, T::constant(0.0));
        Var { tape: Some(self), index: idx, val: v }
    }

    fn push(&self, p0: u32, w0: T, p1: u32, w1: T) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        assert!(idx < NONE_IDX as usize, "tape overflow");
        nodes.push(Node { parent: [p0, p1], weight: [w0, w1] });
        idx as u32
    }

    fn poison(&self, msg: &str) {
        if !self.poisoned.get() {
            self.poisoned.set(true);
            *self.poison_msg.borrow_mut() = Some(msg.to_string());
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.poisoned.get() {
            let msg = self.poison_msg.borrow().clone().unwrap_or_default();
            Err(Error::DomainError(msg))
        } else {
            Ok(())
        }
    }

    /// One reverse sweep from `out`; returns the adjoint of every node.
    fn adjoints(&self, out: u32) -> Vec<T> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![T::constant(0.0); nodes.len()];
        adj[out as usize] = T::constant(1.0);
        for i in (0..=out as usize).rev() {
            let a = adj[i];
            if a.is_zero() {
                continue;
            }
            let node = nodes[i];
            for k in 0..2 {
                let p = node.parent[k];
                if p != NONE_IDX {
                    adj[p as usize] = adj[p as usize] + node.weight[k] * a;
                }
            }
        }
        adj
    }
}

/// Variable on a tape (or a free constant when `tape` is `None`).
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: Option<&'t Tape<T>>,
    index: u32,
    val: T,
}

impl<T: std::fmt::Debug> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({:?} @{})", self.val, self.index as i64)
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    fn lift(tape: Option<&'t Tape<T>>, index: u32, val: T) -> Self {
        Var { tape, index, val }
    }

    fn unary(a: Self, val: T, w: T) -> Self {
        match a.tape {
            Some(t) => Var::lift(Some(t), t.push(a.index, w, NONE_IDX, T::constant(0.0)), val),
            None => Var::lift(None, NONE_IDX, val),
        }
    }

    fn binary(a: Self, b: Self, val: T, wa: T, wb: T) -> Self {
        match (a.tape, b.tape) {
            (Some(t), Some(t2)) => {
                debug_assert!(std::ptr::eq(t, t2), "variables from different tapes");
                Var::lift(Some(t), t.push(a.index, wa, b.index, wb), val)
            }
            (Some(t), None) => Var::lift(Some(t), t.push(a.index, wa, NONE_IDX, T::constant(0.0)), val),
            (None, Some(t)) => Var::lift(Some(t), t.push(b.index, wb, NONE_IDX, T::constant(0.0)), val),
            (None, None) => Var::lift(None, NONE_IDX, val),
        }
    }
}

impl<'t, T: Scalar> Add for Var<'t, T> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Var::binary(self, r, self.val + r.val, T::constant(1.0), T::constant(1.0))
    }
}

impl<'t, T: Scalar> Sub for Var<'t, T> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Var::binary(self, r, self.val - r.val, T::constant(1.0), T::constant(-1.0))
    }
}

impl<'t, T: Scalar> Mul for Var<'t, T> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Var::binary(self, r, self.val * r.val, r.val, self.val)
    }
}

impl<'t, T: Scalar> Div for Var<'t, T> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        if r.val.value() == 0.0 {
            if let Some(t) = self.tape.or(r.tape) {
                t.poison("division by zero");
            }
        }
        let inv = T::constant(1.0) / r.val;
        let val = self.val * inv;
        Var::binary(self, r, val, inv, -val * inv)
    }
}

impl<'t, T: Scalar> Neg for Var<'t, T> {
    type Output = Self;
    fn neg(self) -> Self {
        Var::unary(self, -self.val, T::constant(-1.0))
    }
}

impl<'t, T: Scalar> Scalar for Var<'t, T> {
    fn constant(v: f64) -> Self {
        Var::lift(None, NONE_IDX, T::constant(v))
    }
    fn value(self) -> f64 {
        self.val.value()
    }
    fn is_zero(self) -> bool {
        self.tape.is_none() && self.val.is_zero()
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        Var::unary(self, e, e)
    }
    fn ln(self) -> Self {
        if !(self.val.value() > 0.0) {
            if let Some(t) = self.tape {
                t.poison("log of a nonpositive value");
            }
        }
        Var::unary(self, self.val.ln(), T::constant(1.0) / self.val)
    }
    fn sin(self) -> Self {
        Var::unary(self, self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        Var::unary(self, self.val.cos(), -self.val.sin())
    }
    fn sqrt(self) -> Self {
        if self.val.value() < 0.0 {
            if let Some(t) = self.tape {
                t.poison("sqrt of a negative value");
            }
        }
        let s = self.val.sqrt();
        Var::unary(self, s, T::constant(0.5) / s)
    }
}

/// A scalar-valued function of one real vector, written generically so the
/// same body can be taped or run on duals.
pub trait ScalarFn {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T>;
}

/// A scalar-valued function of two real blocks (used for the joint density
/// over inner variables and outer parameters).
pub trait ScalarFn2 {
    fn eval2<T: Scalar>(&self, a: &[T], b: &[T]) -> Result<T>;
}

/// Views `g(a, b)` as a function of `a` with `b` frozen at given values.
pub struct FixSecond<'a, G> {
    pub g: &'a G,
    pub b: &'a [f64],
}

impl<G: ScalarFn2> ScalarFn for FixSecond<'_, G> {
    fn eval<T: Scalar>(&self, a: &[T]) -> Result<T> {
        let b: Vec<T> = self.b.iter().map(|&v| T::constant(v)).collect();
        self.g.eval2(a, &b)
    }
}

/// Views `g(a, b)` as a function of `b` with `a` frozen at given values.
pub struct FixFirst<'a, G> {
    pub g: &'a G,
    pub a: &'a [f64],
}

impl<G: ScalarFn2> ScalarFn for FixFirst<'_, G> {
    fn eval<T: Scalar>(&self, b: &[T]) -> Result<T> {
        let a: Vec<T> = self.a.iter().map(|&v| T::constant(v)).collect();
        self.g.eval2(&a, b)
    }
}

fn finite_or_domain(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DomainError(format!("nonfinite {what}")))
    }
}

pub fn value_and_grad(f: &impl ScalarFn, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::<f64>::new();
    let vars: Vec<Var<'_, f64>> = x.iter().map(|&v| tape.input(v)).collect();
    let out = f.eval(&vars)?;
    tape.check()?;
    let value = finite_or_domain(out.val, "objective value")?;
    let grad = match out.tape {
        Some(_) => {
            let adj = tape.adjoints(out.index);
            vars.iter().map(|v| adj[v.index as usize]).collect()
        }
        None => vec![0.0; x.len()],
    };
    for g in &grad {
        finite_or_domain(*g, "gradient entry")?;
    }
    Ok((value, grad))
}

pub fn grad(f: &impl ScalarFn, x: &[f64]) -> Result<Vec<f64>> {
    value_and_grad(f, x).map(|(_, g)| g)
}

/// Output of forward-over-reverse sweeps: one Hessian-times-seed row per
/// group, plus the value and exact gradient for free.
pub struct HessianSweeps {
    pub value: f64,
    pub grad: Vec<f64>,
    /// `rows[g][i]` = sum over j in group g of H[i][j].
    pub rows: Vec<Vec<f64>>,
}

/// Forward-over-reverse with a unit tangent on every index of each seed
/// group. With singleton groups this is the full Hessian one column at a
/// time; the estimator passes coarser groups where the sparsity pattern
/// guarantees no two group members share a mixed partial.
pub fn hessian_sweeps(f: &impl ScalarFn, x: &[f64], groups: &[Vec<usize>]) -> Result<HessianSweeps> {
    let n = x.len();
    let mut rows = Vec::with_capacity(groups.len());
    let mut value = f64::NAN;
    let mut grad = vec![0.0; n];
    for (gi, group) in groups.iter().enumerate() {
        let tape = Tape::<Dual>::new();
        let vars: Vec<Var<'_, Dual>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let dx = if group.contains(&i) { 1.0 } else { 0.0 };
                tape.input(Dual::new(v, dx))
            })
            .collect();
        let out = f.eval(&vars)?;
        tape.check()?;
        let mut row = vec![0.0; n];
        match out.tape {
            Some(_) => {
                let adj = tape.adjoints(out.index);
                for (i, v) in vars.iter().enumerate() {
                    let a = adj[v.index as usize];
                    if gi == 0 {
                        grad[i] = finite_or_domain(a.re, "gradient entry")?;
                    }
                    row[i] = finite_or_domain(a.dx, "Hessian entry")?;
                }
            }
            None => {}
        }
        if gi == 0 {
            value = finite_or_domain(out.val.re, "objective value")?;
        }
        rows.push(row);
    }
    if groups.is_empty() {
        let (v, g) = value_and_grad(f, x)?;
        value = v;
        grad = g;
    }
    Ok(HessianSweeps { value, grad, rows })
}

/// Dense Hessian with exact gradient and value. The raw column sweeps must
/// agree with their transposes within `1e-8` relative; the returned matrix is
/// the symmetrized average.
pub fn hessian(f: &impl ScalarFn, x: &[f64]) -> Result<(f64, Vec<f64>, Matrix)> {
    let n = x.len();
    let groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let sweeps = hessian_sweeps(f, x, &groups)?;
    let mut h = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            h[(i, j)] = sweeps.rows[j][i];
        }
    }
    let scale = h.max_abs().max(1.0);
    if h.max_asymmetry() > 1e-8 * scale {
        return Err(Error::DomainError(format!(
            "Hessian asymmetry {:.3e} exceeds tolerance",
            h.max_asymmetry() / scale
        )));
    }
    h.symmetrize();
    Ok((sweeps.value, sweeps.grad, h))
}

/// Mixed second derivatives d^2 g / (da_i db_j) of a two-block function,
/// returned as a `len(a) x len(b)` matrix. One dual sweep per entry of `b`.
pub fn cross_jacobian(g: &impl ScalarFn2, a: &[f64], b: &[f64]) -> Result<Matrix> {
    let na = a.len();
    let nb = b.len();
    let mut c = Matrix::zeros(na, nb);
    for j in 0..nb {
        let tape = Tape::<Dual>::new();
        let avars: Vec<Var<'_, Dual>> = a.iter().map(|&v| tape.input(Dual::new(v, 0.0))).collect();
        let bvars: Vec<Var<'_, Dual>> = b
            .iter()
            .enumerate()
            .map(|(k, &v)| tape.input(Dual::new(v, if k == j { 1.0 } else { 0.0 })))
            .collect();
        let out = g.eval2(&avars, &bvars)?;
        tape.check()?;
        if out.tape.is_some() {
            let adj = tape.adjoints(out.index);
            for (i, v) in avars.iter().enumerate() {
                c[(i, j)] = finite_or_domain(adj[v.index as usize].dx, "cross derivative")?;
            }
        }
        let _ = &bvars;
    }
    Ok(c)
}
