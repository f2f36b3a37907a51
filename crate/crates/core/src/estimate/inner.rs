use crate::ad::{hessian_sweeps, FixSecond, ScalarFn};
use crate::error::{Error, Result};
use crate::estimate::{FitContext, JointDensity};
use crate::linalg::{cholesky, dot, norm_inf, scaled_cholesky, Cholesky, Matrix, ScaledCholesky};
use crate::model::Dataset;

/// Minimizer state of the joint density over psi at fixed theta.
pub struct InnerState {
    pub psi: Vec<f64>,
    /// Joint negative log density at the mode.
    pub value: f64,
    pub grad_norm: f64,
    /// Unshifted Hessian of the joint density at the mode.
    pub h: Matrix,
    pub chol: ScaledCholesky,
    pub iterations: usize,
}

fn eval_value(f: &impl ScalarFn, x: &[f64]) -> Result<f64> {
    let v = f.eval::<f64>(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DomainError("nonfinite joint density".into()))
    }
}

/// Assembles the full (mq + r) Hessian from the grouped sweeps. Effect
/// sweeps fill the per-subject blocks; omega sweeps fill complete columns.
fn assemble_hessian(
    ctx: &FitContext,
    rows: &[Vec<f64>],
) -> Result<Matrix> {
    let lay = ctx.psi_layout;
    let (m, q, r) = (lay.m, lay.q, lay.r);
    let dim = lay.dim();
    let mut h = Matrix::zeros(dim, dim);
    for k in 0..q {
        let sweep = &rows[k];
        for i in 0..m {
            for l in 0..q {
                h[(i * q + l, i * q + k)] = sweep[i * q + l];
            }
        }
    }
    for j in 0..r {
        let sweep = &rows[q + j];
        let col = m * q + j;
        for i in 0..dim {
            h[(i, col)] = sweep[i];
            h[(col, i)] = sweep[i];
        }
    }
    let scale = h.max_abs().max(1.0);
    if h.max_asymmetry() > 1e-6 * scale {
        return Err(Error::DomainError(format!(
            "mode Hessian asymmetry {:.3e} exceeds tolerance",
            h.max_asymmetry() / scale
        )));
    }
    h.symmetrize();
    Ok(h)
}

/// Solves (H + mu I) d = -g, raising the Levenberg shift from 1e-6 by
/// doubling until the shifted matrix factors. The solve runs in Jacobi-
/// scaled coordinates: tiny random-effect variances put curvatures of
/// wildly different magnitude on the diagonal, and factoring the raw matrix
/// would lose the stiff components of the step to rounding.
fn newton_direction(h: &Matrix, g: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = h.rows();
    let dmax = (0..n).map(|i| h[(i, i)].abs()).fold(0.0_f64, f64::max).max(1e-300);
    let s: Vec<f64> =
        (0..n).map(|i| 1.0 / h[(i, i)].abs().max(1e-12 * dmax).sqrt()).collect();
    let gs: Vec<f64> = (0..n).map(|i| -g[i] * s[i]).collect();
    let scaled = |mu: f64| -> Matrix {
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = s[i] * h[(i, j)] * s[j];
            }
            out[(i, i)] += mu * s[i] * s[i];
        }
        out
    };
    let unscale = |ch: Cholesky, gs: &[f64]| -> Vec<f64> {
        let z = ch.solve(gs);
        (0..n).map(|i| z[i] * s[i]).collect()
    };
    if let Ok(ch) = cholesky(&scaled(0.0)) {
        return Ok((unscale(ch, &gs), 0.0));
    }
    let mut mu = 1e-6 * dmax;
    for _ in 0..80 {
        if let Ok(ch) = cholesky(&scaled(mu)) {
            return Ok((unscale(ch, &gs), mu));
        }
        mu *= 2.0;
    }
    Err(Error::IndefiniteModeHessian)
}

/// Newton minimization of the joint density over psi with Armijo
/// backtracking. Converges when the gradient infinity norm falls below
/// `inner_grad_tol * (1 + |value|)`; the Hessian returned is the unshifted
/// one at the final point and must be positive definite.
pub fn inner_solve(
    ctx: &FitContext,
    data: &Dataset,
    theta: &[f64],
    psi0: &[f64],
) -> Result<InnerState> {
    let joint = JointDensity { ctx, data };
    let f = FixSecond { g: &joint, b: theta };
    let groups = ctx.psi_layout.hessian_groups();
    let tol = ctx.config.inner_grad_tol;
    let mut psi = psi0.to_vec();
    for it in 0..=ctx.config.inner_max_iter {
        let sweeps = hessian_sweeps(&f, &psi, &groups)?;
        let gnorm = norm_inf(&sweeps.grad);
        let h = assemble_hessian(ctx, &sweeps.rows)?;
        if gnorm <= tol * (1.0 + sweeps.value.abs()) {
            let chol = scaled_cholesky(&h).map_err(|_| Error::IndefiniteModeHessian)?;
            return Ok(InnerState {
                psi,
                value: sweeps.value,
                grad_norm: gnorm,
                h,
                chol,
                iterations: it,
            });
        }
        if it == ctx.config.inner_max_iter {
            break;
        }
        let (dir, _mu) = newton_direction(&h, &sweeps.grad)?;
        let mut slope = dot(&sweeps.grad, &dir);
        let dir = if slope < 0.0 {
            dir
        } else {
            // Shifted solves can lose descent in pathological corners; the
            // negative gradient always descends.
            slope = -dot(&sweeps.grad, &sweeps.grad);
            sweeps.grad.iter().map(|v| -v).collect()
        };
        // Once the predicted decrease drops under the float resolution of
        // the value, the sufficient-decrease test compares rounding noise
        // and would stall on a zero step; the full Newton step is safe there.
        if -slope <= 64.0 * f64::EPSILON * (1.0 + sweeps.value.abs()) {
            for (p, d) in psi.iter_mut().zip(&dir) {
                *p += d;
            }
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> =
                psi.iter().zip(&dir).map(|(p, d)| p + t * d).collect();
            match eval_value(&f, &trial) {
                Ok(v) if v <= sweeps.value + 1e-4 * t * slope => {
                    psi = trial;
                    accepted = true;
                    break;
                }
                _ => t *= 0.5,
            }
        }
        if !accepted {
            return Err(Error::InnerDivergence { iterations: it, grad_norm: gnorm });
        }
    }
    let (value, grad) = crate::ad::value_and_grad(&f, &psi)?;
    let _ = value;
    Err(Error::InnerDivergence {
        iterations: ctx.config.inner_max_iter,
        grad_norm: norm_inf(&grad),
    })
}
