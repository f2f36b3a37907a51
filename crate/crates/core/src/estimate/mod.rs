//! Maximum-likelihood fitting. The marginal likelihood integrates out the
//! subject effects b and the penalized spline coordinates omega; a Laplace
//! approximation replaces the integral with the joint density at its mode
//! plus half the log determinant of the mode Hessian. The outer optimizer
//! works on theta = (theta_F, beta, log sigma, log sd_b, log sigma_omega)
//! with finite-difference gradients over warm-started inner solves.

mod context;
mod inner;
mod joint;
mod laplace;
mod outer;
mod start;

pub use context::{CurveEvaluator, FitContext};
pub use inner::{inner_solve, InnerState};
pub use joint::JointDensity;
pub use laplace::laplace_nll;
pub use outer::{fit, fit_from, refit_warm, FitResult};
pub(crate) use outer::Objective;
pub use start::starting_values;

use crate::error::{Error, Result};

/// Placement of the spline knots relative to the curve argument.
#[derive(Clone, Debug, PartialEq)]
pub enum KnotStrategy {
    /// Knots span a fixed interval of the raw argument.
    Interval { lo: f64, hi: f64 },
    /// Argument is mapped onto [0, 1] by (gamma - lo) / (hi - lo) with
    /// lo = t_min - c * sigma_shift and hi = t_max + c * sigma_shift, where
    /// t_min, t_max are the data range of the argument at zero effects and
    /// sigma_shift aggregates the standard deviations of the random effects
    /// entering the argument. The window widens as those variances grow, so
    /// shifted subjects stay inside the knot span.
    Scaled { c: f64 },
}

#[derive(Clone, Debug)]
pub struct MonotoneConfig {
    /// Weight of the negative-slope penalty.
    pub weight: f64,
    /// Number of grid points where the slope is monitored.
    pub grid_points: usize,
    /// Smoothing constant of the soft negative part.
    pub epsilon: f64,
}

impl Default for MonotoneConfig {
    fn default() -> Self {
        MonotoneConfig { weight: 0.0, grid_points: 200, epsilon: 1e-6 }
    }
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Mean-structure expression, e.g. `beta0 + b1 + exp(b2) * f(t - ilogit(b3))`.
    pub model: String,
    /// Number of fixed effects referenced by the model.
    pub p: usize,
    /// Number of random effects per subject (at least one).
    pub q: usize,
    pub degree: usize,
    pub interior_knots: usize,
    pub knots: KnotStrategy,
    /// Order of the difference penalty on spline coefficients.
    pub penalty_order: usize,
    /// Constrain the curve to average zero over the knot range, freeing the
    /// intercept to live in beta.
    pub sum_to_zero: bool,
    /// Continue the basis linearly outside the knot range instead of failing;
    /// keeps trial parameter values with wandering arguments evaluable.
    pub extrapolate: bool,
    pub monotone: Option<MonotoneConfig>,
    /// Inner Newton: stop when the gradient infinity norm falls below
    /// `inner_grad_tol * (1 + |value|)`.
    pub inner_grad_tol: f64,
    pub inner_max_iter: usize,
    /// Outer quasi-Newton: converged when the finite-difference gradient
    /// infinity norm falls below `outer_grad_tol`.
    pub outer_grad_tol: f64,
    pub outer_rel_tol: f64,
    pub outer_max_iter: usize,
    /// Relative step of the outer central differences.
    pub fd_step: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            model: String::new(),
            p: 0,
            q: 1,
            degree: 3,
            interior_knots: 11,
            knots: KnotStrategy::Scaled { c: 3.0 },
            penalty_order: 2,
            sum_to_zero: true,
            extrapolate: true,
            monotone: None,
            inner_grad_tol: 1e-8,
            inner_max_iter: 100,
            outer_grad_tol: 1e-5,
            outer_rel_tol: 1e-9,
            outer_max_iter: 500,
            fd_step: 1e-5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidConfig("q must be at least 1".into()));
        }
        if self.degree < 1 {
            return Err(Error::InvalidConfig("degree must be at least 1".into()));
        }
        if let KnotStrategy::Interval { lo, hi } = self.knots {
            if !(hi > lo) {
                return Err(Error::InvalidConfig(format!(
                    "knot interval [{lo}, {hi}] is empty"
                )));
            }
        }
        if let KnotStrategy::Scaled { c } = self.knots {
            if !(c >= 0.0) {
                return Err(Error::InvalidConfig("scaling margin c must be nonnegative".into()));
            }
        }
        if let Some(mono) = &self.monotone {
            if mono.weight < 0.0 || mono.grid_points < 2 || !(mono.epsilon > 0.0) {
                return Err(Error::InvalidConfig("invalid monotonicity settings".into()));
            }
        }
        Ok(())
    }
}

/// Index layout of the flat outer parameter vector
/// [theta_F | beta | log sigma | log sd_b (q) | log sigma_omega].
#[derive(Clone, Copy, Debug)]
pub struct ParamLayout {
    pub null_dim: usize,
    pub p: usize,
    pub q: usize,
}

impl ParamLayout {
    pub fn dim(&self) -> usize {
        self.null_dim + self.p + self.q + 2
    }

    pub fn theta_f<'a, T>(&self, th: &'a [T]) -> &'a [T] {
        &th[..self.null_dim]
    }

    pub fn beta<'a, T>(&self, th: &'a [T]) -> &'a [T] {
        &th[self.null_dim..self.null_dim + self.p]
    }

    pub fn log_sigma<T: Copy>(&self, th: &[T]) -> T {
        th[self.null_dim + self.p]
    }

    pub fn log_sd_b<'a, T>(&self, th: &'a [T]) -> &'a [T] {
        let s = self.null_dim + self.p + 1;
        &th[s..s + self.q]
    }

    pub fn log_sigma_omega<T: Copy>(&self, th: &[T]) -> T {
        th[self.dim() - 1]
    }

    /// Indices of the variance block (log sigma, log sd_b, log sigma_omega).
    pub fn variance_indices(&self) -> std::ops::Range<usize> {
        self.null_dim + self.p..self.dim()
    }
}

/// Index layout of the flat inner vector [b (m x q, subject-major) | omega].
#[derive(Clone, Copy, Debug)]
pub struct PsiLayout {
    pub m: usize,
    pub q: usize,
    pub r: usize,
}

impl PsiLayout {
    pub fn dim(&self) -> usize {
        self.m * self.q + self.r
    }

    pub fn b<'a, T>(&self, psi: &'a [T], subject: usize) -> &'a [T] {
        &psi[subject * self.q..(subject + 1) * self.q]
    }

    pub fn omega<'a, T>(&self, psi: &'a [T]) -> &'a [T] {
        &psi[self.m * self.q..]
    }

    /// Seed groups for the mode Hessian: the joint density couples random
    /// effects only within a subject, so one sweep per effect component
    /// (summed across subjects) recovers every subject block; omega
    /// coordinates get singleton sweeps because their rows are dense.
    pub fn hessian_groups(&self) -> Vec<Vec<usize>> {
        let mut groups = Vec::with_capacity(self.q + self.r);
        for k in 0..self.q {
            groups.push((0..self.m).map(|i| i * self.q + k).collect());
        }
        for j in 0..self.r {
            groups.push(vec![self.m * self.q + j]);
        }
        groups
    }
}

/// Typed view of the flat outer parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub theta_f: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_sigma: f64,
    pub log_sd_b: Vec<f64>,
    pub log_sigma_omega: f64,
}

impl ParamVector {
    pub fn from_flat(layout: &ParamLayout, th: &[f64]) -> Self {
        assert_eq!(th.len(), layout.dim());
        ParamVector {
            theta_f: layout.theta_f(th).to_vec(),
            beta: layout.beta(th).to_vec(),
            log_sigma: layout.log_sigma(th),
            log_sd_b: layout.log_sd_b(th).to_vec(),
            log_sigma_omega: layout.log_sigma_omega(th),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut th = self.theta_f.clone();
        th.extend_from_slice(&self.beta);
        th.push(self.log_sigma);
        th.extend_from_slice(&self.log_sd_b);
        th.push(self.log_sigma_omega);
        th
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn sd_b(&self) -> Vec<f64> {
        self.log_sd_b.iter().map(|v| v.exp()).collect()
    }

    pub fn sigma_omega(&self) -> f64 {
        self.log_sigma_omega.exp()
    }
}
