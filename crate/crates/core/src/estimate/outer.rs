use std::cell::{Cell, RefCell};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimate::{laplace_nll, starting_values, FitContext, InnerState, ParamVector};
use crate::linalg::{dot, norm2, norm_inf, Matrix};
use crate::model::Dataset;

/// Converged (or best-effort) maximum likelihood fit.
pub struct FitResult {
    pub theta: Vec<f64>,
    pub params: ParamVector,
    /// Joint-density mode at the final theta.
    pub psi: Vec<f64>,
    pub nll: f64,
    /// Infinity norm of the outer finite-difference gradient at exit.
    pub grad_norm: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub nll_evals: usize,
    pub inner_iterations: usize,
    pub wall_seconds: f64,
    /// Inner state (mode, Hessian, factorization) at the final theta.
    pub inner: InnerState,
}

/// Outer objective: Laplace negative log likelihood plus a quadratic hinge
/// that activates once any log-scale variance parameter leaves [-15, 15],
/// keeping line-search excursions from overflowing the exponentials.
pub(crate) struct Objective<'a> {
    pub ctx: &'a FitContext,
    pub data: &'a Dataset,
    rng: RefCell<ChaCha8Rng>,
    pub evals: Cell<usize>,
    pub inner_iters: Cell<usize>,
}

const SAFEGUARD_BOUND: f64 = 15.0;
const SAFEGUARD_WEIGHT: f64 = 1e3;

impl<'a> Objective<'a> {
    pub fn new(ctx: &'a FitContext, data: &'a Dataset) -> Self {
        Objective {
            ctx,
            data,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(0x0f17)),
            evals: Cell::new(0),
            inner_iters: Cell::new(0),
        }
    }

    fn safeguard(&self, theta: &[f64]) -> f64 {
        let mut pen = 0.0;
        for i in self.ctx.param_layout.variance_indices() {
            let excess = theta[i].abs() - SAFEGUARD_BOUND;
            if excess > 0.0 {
                pen += SAFEGUARD_WEIGHT * excess * excess;
            }
        }
        pen
    }

    /// One objective evaluation with retries: failed inner solves restart
    /// from jittered warm points, then from zero.
    pub fn eval(&self, theta: &[f64], warm: &[f64]) -> Result<(f64, InnerState)> {
        let mut last_err = None;
        for attempt in 0..4 {
            let psi0: Vec<f64> = match attempt {
                0 => warm.to_vec(),
                2 => vec![0.0; warm.len()],
                _ => {
                    let base: &[f64] = if attempt == 1 { warm } else { &vec![0.0; warm.len()] };
                    let mut rng = self.rng.borrow_mut();
                    base.iter()
                        .map(|&v| v + 0.1 * (1.0 + v.abs()) * rng.gen_range(-1.0..1.0))
                        .collect()
                }
            };
            match laplace_nll(self.ctx, self.data, theta, &psi0) {
                Ok((nll, state)) => {
                    self.evals.set(self.evals.get() + 1);
                    self.inner_iters.set(self.inner_iters.get() + state.iterations);
                    return Ok((nll + self.safeguard(theta), state));
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap())
    }

    /// Central finite differences with every probe warm-started from the
    /// current center mode.
    pub fn fd_grad(&self, theta: &[f64], center_psi: &[f64]) -> Result<Vec<f64>> {
        let dim = theta.len();
        let mut g = vec![0.0; dim];
        for i in 0..dim {
            let h = self.ctx.config.fd_step * theta[i].abs().max(1.0);
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[i] += h;
            dn[i] -= h;
            let (fp, _) = self.eval(&up, center_psi)?;
            let (fm, _) = self.eval(&dn, center_psi)?;
            g[i] = (fp - fm) / (2.0 * h);
        }
        Ok(g)
    }
}

/// BFGS update of the inverse Hessian approximation:
/// B <- (I - rho s y^T) B (I - rho y s^T) + rho s s^T.
fn bfgs_update(b: &Matrix, s: &[f64], y: &[f64], rho: f64) -> Matrix {
    let dim = s.len();
    let by = b.matvec(y);
    let yby = dot(y, &by);
    let mut out = b.clone();
    for i in 0..dim {
        for j in 0..dim {
            out[(i, j)] += -rho * (s[i] * by[j] + by[i] * s[j])
                + rho * rho * yby * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
    out
}

/// Fits the model from automatic starting values.
pub fn fit(ctx: &FitContext, data: &Dataset) -> Result<FitResult> {
    let (theta0, psi0) = starting_values(ctx, data)?;
    fit_from(ctx, data, theta0, psi0)
}

/// Quasi-Newton maximization of the Laplace likelihood from a given start.
/// Accepted iterates are strictly nonincreasing in the objective; the
/// convergence flag requires the gradient test, not just stalling.
pub fn fit_from(
    ctx: &FitContext,
    data: &Dataset,
    theta0: Vec<f64>,
    psi0: Vec<f64>,
) -> Result<FitResult> {
    let t_start = Instant::now();
    let obj = Objective::new(ctx, data);
    let dim = ctx.param_layout.dim();
    assert_eq!(theta0.len(), dim);

    let mut theta = theta0;
    let (mut f_cur, mut state) = obj.eval(&theta, &psi0)?;
    let mut grad = obj.fd_grad(&theta, &state.psi)?;
    let mut b = Matrix::identity(dim);
    let mut scaled_once = false;
    let mut converged = false;
    let mut iterations = 0;
    let grad_tol = ctx.config.outer_grad_tol;

    let mut stalls = 0;
    for it in 0..ctx.config.outer_max_iter {
        iterations = it;
        if norm_inf(&grad) <= grad_tol {
            converged = true;
            break;
        }
        let mut dir: Vec<f64> = b.matvec(&grad).iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            b = Matrix::identity(dim);
            scaled_once = false;
            dir = grad.iter().map(|v| -v).collect();
            slope = -dot(&grad, &grad);
        }

        let line_search = |dir: &[f64], slope: f64| {
            let mut t = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> =
                    theta.iter().zip(dir).map(|(x, d)| x + t * d).collect();
                match obj.eval(&trial, &state.psi) {
                    Ok((f_new, st)) if f_new <= f_cur + 1e-4 * t * slope => {
                        return Some((trial, f_new, st));
                    }
                    _ => t *= 0.5,
                }
            }
            None
        };
        let mut accepted = line_search(&dir, slope);
        if accepted.is_none() && scaled_once {
            // Quasi-Newton direction failed; retry along steepest descent.
            b = Matrix::identity(dim);
            scaled_once = false;
            dir = grad.iter().map(|v| -v).collect();
            accepted = line_search(&dir, -dot(&grad, &grad));
        }
        let Some((theta_new, f_new, state_new)) = accepted else {
            // No admissible step in any direction; genuinely stuck.
            break;
        };
        let grad_new = obj.fd_grad(&theta_new, &state_new.psi)?;

        let s: Vec<f64> = theta_new.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-10 * norm2(&s) * norm2(&yv) {
            if !scaled_once {
                b = Matrix::identity(dim).scale(sy / dot(&yv, &yv));
                scaled_once = true;
            }
            b = bfgs_update(&b, &s, &yv, 1.0 / sy);
        }

        let decrease = f_cur - f_new;
        theta = theta_new;
        f_cur = f_new;
        state = state_new;
        grad = grad_new;
        // A small relative decrease with a small gradient is convergence;
        // alone it is a stall, which BFGS often works through while its
        // curvature model catches up. Persistent stalling ends the loop.
        if decrease <= ctx.config.outer_rel_tol * (1.0 + f_cur.abs()) {
            if norm_inf(&grad) <= grad_tol {
                converged = true;
                break;
            }
            stalls += 1;
            if stalls >= 10 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    if !converged {
        converged = norm_inf(&grad) <= grad_tol;
    }

    // The safeguard is flat at interior optima; report the plain likelihood.
    let nll = f_cur;
    let params = ParamVector::from_flat(&ctx.param_layout, &theta);
    Ok(FitResult {
        theta,
        params,
        psi: state.psi.clone(),
        nll,
        grad_norm: norm_inf(&grad),
        converged,
        outer_iterations: iterations,
        nll_evals: obj.evals.get(),
        inner_iterations: obj.inner_iters.get(),
        wall_seconds: t_start.elapsed().as_secs_f64(),
        inner: state,
    })
}

/// Refit with warm starts from a previous solution (bootstrap replicates).
pub fn refit_warm(
    ctx: &FitContext,
    data: &Dataset,
    theta0: &[f64],
    psi0: &[f64],
) -> Result<FitResult> {
    fit_from(ctx, data, theta0.to_vec(), psi0.to_vec())
}
