use crate::error::Result;
use crate::estimate::{inner_solve, FitContext, InnerState};
use crate::model::Dataset;

const LOG_2PI: f64 = 1.8378770664093453;

/// Laplace-approximated negative log marginal likelihood at theta:
///
/// -(mq + r)/2 log 2pi + (1/2) log|H(psi_hat)| + joint_nld(psi_hat, theta),
///
/// where psi_hat minimizes the joint density at theta and H is its Hessian
/// there. Exact whenever the model is linear in psi.
pub fn laplace_nll(
    ctx: &FitContext,
    data: &Dataset,
    theta: &[f64],
    warm_psi: &[f64],
) -> Result<(f64, InnerState)> {
    let state = inner_solve(ctx, data, theta, warm_psi)?;
    let dim = ctx.psi_layout.dim() as f64;
    let nll = -dim / 2.0 * LOG_2PI + 0.5 * state.chol.logdet() + state.value;
    Ok((nll, state))
}
