use crate::ad::{grad, Scalar, ScalarFn};
use crate::error::{Error, Result};
use crate::estimate::{FitContext, KnotStrategy};
use crate::linalg::{cholesky, norm_inf, Matrix};
use crate::model::Dataset;
use crate::splines::difference_penalty;

const SIGMA_FLOOR: f64 = 1e-4;

pub(crate) struct Step1 {
    /// Unconstrained spline coefficients (length K).
    pub coef: Vec<f64>,
    /// Selected least-squares penalty weight.
    pub lambda: f64,
}

/// Penalized least squares of `target` on the basis at the zero-effect
/// arguments, with the penalty weight chosen by generalized cross
/// validation over a 20-point logarithmic grid.
pub(crate) fn penalized_curve(
    ctx: &FitContext,
    data: &Dataset,
    target: &[f64],
) -> Result<Step1> {
    let n = data.n_obs();
    let zero_beta = vec![0.0; ctx.config.p];
    let zero_b = vec![0.0; ctx.config.q];
    let mut args = Vec::with_capacity(n);
    for i in 0..n {
        let gamma = ctx.model.eval_spline_arg::<f64>(&zero_beta, &zero_b, ctx.cov.row(i))?;
        let u = match ctx.config.knots {
            KnotStrategy::Interval { .. } => gamma,
            KnotStrategy::Scaled { .. } => {
                (gamma - ctx.t_bounds.0) / (ctx.t_bounds.1 - ctx.t_bounds.0)
            }
        };
        args.push(u);
    }
    let x = ctx.basis.basis_matrix(&args, 0, ctx.config.extrapolate)?;
    let k = ctx.basis.num_basis();
    let s = difference_penalty(k, ctx.config.penalty_order)?;
    let xtx = x.transpose().matmul(&x);
    let xty = x.tr_matvec(target);
    let ridge = 1e-10 * (0..k).map(|i| xtx[(i, i)]).sum::<f64>().max(1.0) / k as f64;

    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for j in 0..20 {
        let lambda = 10f64.powf(-8.0 + 14.0 * j as f64 / 19.0);
        let mut a = xtx.add(&s.scale(lambda));
        for i in 0..k {
            a[(i, i)] += ridge;
        }
        let Ok(ch) = cholesky(&a) else { continue };
        let coef = ch.solve(&xty);
        let fitted = x.matvec(&coef);
        let rss: f64 = fitted.iter().zip(target).map(|(f, y)| (y - f) * (y - f)).sum();
        let edf = {
            let ainv_xtx = ch.solve_matrix(&xtx);
            (0..k).map(|i| ainv_xtx[(i, i)]).sum::<f64>()
        };
        if edf >= n as f64 {
            continue;
        }
        let gcv = n as f64 * rss / ((n as f64 - edf) * (n as f64 - edf));
        if gcv.is_finite() && best.as_ref().is_none_or(|(b, _, _)| gcv < *b) {
            best = Some((gcv, lambda, coef));
        }
    }
    let (_, lambda, coef) = best.ok_or(Error::SingularDesign)?;
    Ok(Step1 { coef, lambda })
}

/// Mean response for one observation as a function of beta, with b = 0 and
/// the curve frozen at the step-1 coefficients under the zero-effect scaling.
struct EtaOfBeta<'a> {
    ctx: &'a FitContext,
    row: &'a [f64],
    coef: &'a [f64],
}

impl ScalarFn for EtaOfBeta<'_> {
    fn eval<T: Scalar>(&self, beta: &[T]) -> Result<T> {
        let ctx = self.ctx;
        let b = vec![T::constant(0.0); ctx.config.q];
        let spline = |gamma: T| -> Result<T> {
            let u = match ctx.config.knots {
                KnotStrategy::Interval { .. } => gamma,
                KnotStrategy::Scaled { .. } => {
                    (gamma - T::constant(ctx.t_bounds.0))
                        * T::constant(1.0 / (ctx.t_bounds.1 - ctx.t_bounds.0))
                }
            };
            let row = ctx.basis.eval_row(u, 0, ctx.config.extrapolate)?;
            let mut acc = T::constant(0.0);
            for (r, &c) in row.into_iter().zip(self.coef) {
                acc = acc + r * T::constant(c);
            }
            Ok(acc)
        };
        ctx.model.eval(beta, &b, self.row, &spline)
    }
}

/// Damped Gauss-Newton for the fixed effects against the frozen step-1 curve.
fn refine_beta(ctx: &FitContext, data: &Dataset, coef: &[f64]) -> Result<Vec<f64>> {
    let p = ctx.config.p;
    if p == 0 {
        return Ok(Vec::new());
    }
    let n = data.n_obs();
    let mut beta = vec![0.0; p];
    let eta_all = |beta: &[f64]| -> Result<Vec<f64>> {
        (0..n)
            .map(|i| EtaOfBeta { ctx, row: ctx.cov.row(i), coef }.eval::<f64>(beta))
            .collect()
    };
    let rss_of = |eta: &[f64]| -> f64 {
        eta.iter().zip(data.y()).map(|(e, y)| (y - e) * (y - e)).sum()
    };
    let mut eta = eta_all(&beta)?;
    let mut rss = rss_of(&eta);
    for _ in 0..30 {
        let mut jtj = Matrix::zeros(p, p);
        let mut jtr = vec![0.0; p];
        for i in 0..n {
            let gi = grad(&EtaOfBeta { ctx, row: ctx.cov.row(i), coef }, &beta)?;
            let ri = data.y()[i] - eta[i];
            for a in 0..p {
                jtr[a] += gi[a] * ri;
                for b in 0..p {
                    jtj[(a, b)] += gi[a] * gi[b];
                }
            }
        }
        let ridge = 1e-10 * (0..p).map(|i| jtj[(i, i)]).sum::<f64>().max(1.0) / p as f64;
        for i in 0..p {
            jtj[(i, i)] += ridge;
        }
        let ch = cholesky(&jtj).map_err(|_| Error::SingularDesign)?;
        let delta = ch.solve(&jtr);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let trial: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + t * d).collect();
            if let Ok(eta_t) = eta_all(&trial) {
                let rss_t = rss_of(&eta_t);
                if rss_t <= rss {
                    beta = trial;
                    eta = eta_t;
                    rss = rss_t;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved || norm_inf(&delta) * t < 1e-10 * (1.0 + norm_inf(&beta)) {
            break;
        }
    }
    Ok(beta)
}

/// Two-step starting values: a generalized-cross-validated penalized spline
/// at zero effects, then Gauss-Newton for beta against that frozen curve,
/// then moment-style heuristics for the variance parameters.
pub fn starting_values(ctx: &FitContext, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.n_obs();
    let m = data.n_subjects();
    let y = data.y();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let target: Vec<f64> = if ctx.config.sum_to_zero {
        y.iter().map(|v| v - y_mean).collect()
    } else {
        y.to_vec()
    };
    let step1 = penalized_curve(ctx, data, &target)?;
    let beta = refine_beta(ctx, data, &step1.coef)?;

    // Residuals at b = 0 against the frozen curve.
    let resid: Vec<f64> = (0..n)
        .map(|i| {
            let eta = EtaOfBeta { ctx, row: ctx.cov.row(i), coef: &step1.coef }
                .eval::<f64>(&beta)?;
            Ok(y[i] - eta)
        })
        .collect::<Result<_>>()?;
    let mut between = Vec::with_capacity(m);
    let mut within_ss = 0.0;
    for i in 0..m {
        let range = data.subject_range(i);
        let ni = range.len() as f64;
        let mean = range.clone().map(|o| resid[o]).sum::<f64>() / ni;
        for o in range {
            within_ss += (resid[o] - mean) * (resid[o] - mean);
        }
        between.push(mean);
    }
    let bmean = between.iter().sum::<f64>() / m as f64;
    let bvar = between.iter().map(|v| (v - bmean) * (v - bmean)).sum::<f64>()
        / (m as f64 - 1.0).max(1.0);
    let sd_between = bvar.sqrt().max(SIGMA_FLOOR);
    let sigma = (within_ss / (n as f64 - m as f64).max(1.0)).sqrt().max(SIGMA_FLOOR);

    // Project the step-1 curve into the (possibly constrained) coefficient
    // space to seed theta_F and omega.
    let v = match &ctx.constraint {
        Some(tr) => tr.reduce(&step1.coef),
        None => step1.coef.clone(),
    };
    let (theta_f, omega) = ctx.penalty.project(&v);

    // The least-squares penalty weight maps to the noise-to-prior variance
    // ratio: lambda_ls = sigma^2 / sigma_omega^2.
    let log_sigma_omega = sigma.ln() - 0.5 * step1.lambda.ln();

    let mut theta = theta_f;
    theta.extend_from_slice(&beta);
    theta.push(sigma.ln());
    for _ in 0..ctx.config.q {
        theta.push(sd_between.ln());
    }
    theta.push(log_sigma_omega);

    let mut psi = vec![0.0; ctx.psi_layout.dim()];
    psi[m * ctx.config.q..].copy_from_slice(&omega);
    Ok((theta, psi))
}
