use std::collections::BTreeSet;

use crate::ad::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    InvLogit,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::InvLogit => "ilogit",
        }
    }
}

/// Parsed mean-structure expression. Labels keep whatever integers the model
/// text used; compilation maps them onto dense slots.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Beta(usize),
    RandEff(usize),
    Cov(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Spline(Box<Expr>),
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut std::fmt::Formatter<'_>, parent: u8, right: bool) -> std::fmt::Result {
        let prec = self.precedence();
        let needs = prec < parent || (prec == parent && right && prec <= 2);
        if needs {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(v) => {
                if *v == std::f64::consts::PI {
                    write!(f, "pi")?;
                } else {
                    write!(f, "{v}")?;
                }
            }
            Expr::Beta(i) => write!(f, "beta{i}")?,
            Expr::RandEff(i) => write!(f, "b{i}")?,
            Expr::Cov(name) => write!(f, "{name}")?,
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 3, false)?;
            }
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1, false)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 1, true)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1, false)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 1, true)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2, false)?;
                write!(f, " * ")?;
                b.fmt_prec(f, 2, true)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2, false)?;
                write!(f, " / ")?;
                b.fmt_prec(f, 2, true)?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0, false)?;
                write!(f, ")")?;
            }
            Expr::Spline(a) => {
                write!(f, "f(")?;
                a.fmt_prec(f, 0, false)?;
                write!(f, ")")?;
            }
        }
        if needs {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

/// Expression with labels and covariate names resolved to dense indices.
#[derive(Clone, Debug)]
enum RExpr {
    Const(f64),
    Beta(usize),
    B(usize),
    Cov(usize),
    Neg(Box<RExpr>),
    Add(Box<RExpr>, Box<RExpr>),
    Sub(Box<RExpr>, Box<RExpr>),
    Mul(Box<RExpr>, Box<RExpr>),
    Div(Box<RExpr>, Box<RExpr>),
    Call(Func, Box<RExpr>),
    Spline(Box<RExpr>),
}

/// Validated model bound to slot indices. Fixed-effect labels sort into beta
/// slots 0..p, random-effect labels into slots 0..q, so `beta0 + beta3`
/// with p = 2 occupies slots 0 and 1.
#[derive(Debug)]
pub struct CompiledModel {
    pub expr: Expr,
    resolved: RExpr,
    spline_arg: RExpr,
    pub beta_labels: Vec<usize>,
    pub b_labels: Vec<usize>,
    pub covariates: Vec<String>,
    /// Random-effect slots appearing inside the spline argument.
    pub b_in_spline: Vec<usize>,
}

fn walk<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    f(e);
    match e {
        Expr::Neg(a) | Expr::Call(_, a) | Expr::Spline(a) => walk(a, f),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            walk(a, f);
            walk(b, f);
        }
        _ => {}
    }
}

/// First covariate mentioned inside the spline argument, the natural
/// default for the axis a fitted-curve table sweeps.
pub fn spline_covariate(expr: &Expr) -> Option<String> {
    let mut arg: Option<&Expr> = None;
    walk(expr, &mut |e| {
        if let Expr::Spline(a) = e {
            arg.get_or_insert(a);
        }
    });
    let mut found = None;
    walk(arg?, &mut |e| {
        if let Expr::Cov(name) = e {
            if found.is_none() {
                found = Some(name.clone());
            }
        }
    });
    found
}

/// Counts of distinct fixed- and random-effect labels in an expression, for
/// callers that infer the model dimensions instead of declaring them.
pub fn effect_counts(expr: &Expr) -> (usize, usize) {
    let mut beta = BTreeSet::new();
    let mut b = BTreeSet::new();
    walk(expr, &mut |e| match e {
        Expr::Beta(l) => {
            beta.insert(*l);
        }
        Expr::RandEff(l) => {
            b.insert(*l);
        }
        _ => {}
    });
    (beta.len(), b.len())
}

fn resolve(e: &Expr, beta: &[usize], b: &[usize], covs: &[String]) -> RExpr {
    match e {
        Expr::Const(v) => RExpr::Const(*v),
        Expr::Beta(l) => RExpr::Beta(beta.binary_search(l).unwrap()),
        Expr::RandEff(l) => RExpr::B(b.binary_search(l).unwrap()),
        Expr::Cov(name) => RExpr::Cov(covs.iter().position(|c| c == name).unwrap()),
        Expr::Neg(a) => RExpr::Neg(Box::new(resolve(a, beta, b, covs))),
        Expr::Add(x, y) => RExpr::Add(
            Box::new(resolve(x, beta, b, covs)),
            Box::new(resolve(y, beta, b, covs)),
        ),
        Expr::Sub(x, y) => RExpr::Sub(
            Box::new(resolve(x, beta, b, covs)),
            Box::new(resolve(y, beta, b, covs)),
        ),
        Expr::Mul(x, y) => RExpr::Mul(
            Box::new(resolve(x, beta, b, covs)),
            Box::new(resolve(y, beta, b, covs)),
        ),
        Expr::Div(x, y) => RExpr::Div(
            Box::new(resolve(x, beta, b, covs)),
            Box::new(resolve(y, beta, b, covs)),
        ),
        Expr::Call(fun, a) => RExpr::Call(*fun, Box::new(resolve(a, beta, b, covs))),
        Expr::Spline(a) => RExpr::Spline(Box::new(resolve(a, beta, b, covs))),
    }
}

impl CompiledModel {
    /// Validates the expression against declared dimensions and the columns
    /// available in the data, then resolves names to dense indices.
    pub fn compile(expr: Expr, p: usize, q: usize, available: &[String]) -> Result<Self> {
        let mut beta_set = BTreeSet::new();
        let mut b_set = BTreeSet::new();
        let mut covs: Vec<String> = Vec::new();
        let mut spline_count = 0usize;
        walk(&expr, &mut |e| match e {
            Expr::Beta(l) => {
                beta_set.insert(*l);
            }
            Expr::RandEff(l) => {
                b_set.insert(*l);
            }
            Expr::Cov(name) => {
                if !covs.iter().any(|c| c == name) {
                    covs.push(name.clone());
                }
            }
            Expr::Spline(_) => spline_count += 1,
            _ => {}
        });
        if spline_count == 0 {
            return Err(Error::InvalidConfig(
                "model must contain the curve term f(...)".into(),
            ));
        }
        if spline_count > 1 {
            return Err(Error::MultipleSplineNodes);
        }
        let beta_labels: Vec<usize> = beta_set.into_iter().collect();
        let b_labels: Vec<usize> = b_set.into_iter().collect();
        if beta_labels.len() != p {
            return Err(Error::InvalidConfig(format!(
                "model uses {} distinct fixed-effect labels but p = {p}",
                beta_labels.len()
            )));
        }
        if b_labels.len() != q {
            return Err(Error::InvalidConfig(format!(
                "model uses {} distinct random-effect labels but q = {q}",
                b_labels.len()
            )));
        }
        for c in &covs {
            if !available.iter().any(|a| a == c) {
                return Err(Error::UnboundName(c.clone()));
            }
        }
        let resolved = resolve(&expr, &beta_labels, &b_labels, &covs);
        let mut spline_arg = None;
        find_spline_arg(&resolved, &mut spline_arg);
        let spline_arg = spline_arg.expect("spline node present after validation");
        let mut b_in_spline = Vec::new();
        collect_b(&spline_arg, &mut b_in_spline);
        b_in_spline.sort_unstable();
        b_in_spline.dedup();
        Ok(CompiledModel {
            expr,
            resolved,
            spline_arg,
            beta_labels,
            b_labels,
            covariates: covs,
            b_in_spline,
        })
    }

    pub fn p(&self) -> usize {
        self.beta_labels.len()
    }

    pub fn q(&self) -> usize {
        self.b_labels.len()
    }

    /// Mean response for one observation. `row` holds covariate values in
    /// `self.covariates` order; `spline` maps the curve argument to its value.
    pub fn eval<T: Scalar>(
        &self,
        beta: &[T],
        b: &[T],
        row: &[f64],
        spline: &impl Fn(T) -> Result<T>,
    ) -> Result<T> {
        eval_r(&self.resolved, beta, b, row, spline)
    }

    /// The curve argument alone (everything inside `f(...)`).
    pub fn eval_spline_arg<T: Scalar>(&self, beta: &[T], b: &[T], row: &[f64]) -> Result<T> {
        let no_spline = |_: T| -> Result<T> {
            Err(Error::InvalidConfig("nested curve term".into()))
        };
        eval_r(&self.spline_arg, beta, b, row, &no_spline)
    }
}

fn find_spline_arg(e: &RExpr, out: &mut Option<RExpr>) {
    match e {
        RExpr::Spline(a) => *out = Some((**a).clone()),
        RExpr::Neg(a) | RExpr::Call(_, a) => find_spline_arg(a, out),
        RExpr::Add(a, b) | RExpr::Sub(a, b) | RExpr::Mul(a, b) | RExpr::Div(a, b) => {
            find_spline_arg(a, out);
            find_spline_arg(b, out);
        }
        _ => {}
    }
}

fn collect_b(e: &RExpr, out: &mut Vec<usize>) {
    match e {
        RExpr::B(i) => out.push(*i),
        RExpr::Neg(a) | RExpr::Call(_, a) | RExpr::Spline(a) => collect_b(a, out),
        RExpr::Add(a, b) | RExpr::Sub(a, b) | RExpr::Mul(a, b) | RExpr::Div(a, b) => {
            collect_b(a, out);
            collect_b(b, out);
        }
        _ => {}
    }
}

fn eval_r<T: Scalar>(
    e: &RExpr,
    beta: &[T],
    b: &[T],
    row: &[f64],
    spline: &impl Fn(T) -> Result<T>,
) -> Result<T> {
    Ok(match e {
        RExpr::Const(v) => T::constant(*v),
        RExpr::Beta(i) => beta[*i],
        RExpr::B(i) => b[*i],
        RExpr::Cov(i) => T::constant(row[*i]),
        RExpr::Neg(a) => -eval_r(a, beta, b, row, spline)?,
        RExpr::Add(x, y) => eval_r(x, beta, b, row, spline)? + eval_r(y, beta, b, row, spline)?,
        RExpr::Sub(x, y) => eval_r(x, beta, b, row, spline)? - eval_r(y, beta, b, row, spline)?,
        RExpr::Mul(x, y) => eval_r(x, beta, b, row, spline)? * eval_r(y, beta, b, row, spline)?,
        RExpr::Div(x, y) => eval_r(x, beta, b, row, spline)? / eval_r(y, beta, b, row, spline)?,
        RExpr::Call(fun, a) => {
            let v = eval_r(a, beta, b, row, spline)?;
            match fun {
                Func::Exp => v.exp(),
                Func::Log => v.ln(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::InvLogit => v.inv_logit(),
            }
        }
        RExpr::Spline(a) => {
            let arg = eval_r(a, beta, b, row, spline)?;
            spline(arg)?
        }
    })
}
