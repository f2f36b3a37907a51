use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimate::{refit_warm, FitContext, FitResult};
use crate::inference::{fixed_cov, param_name};
use crate::linalg::Matrix;
use crate::model::Dataset;
use crate::rng::{stream, Purpose};

/// Response vector implied by fixed parameters `theta`, curve coefficients
/// `omega`, per-subject effects `b` (m x q), and noise draws `eps` (one per
/// observation, standard scale; sigma comes from `theta`).
pub(crate) fn bootstrap_response(
    ctx: &FitContext,
    data: &Dataset,
    theta: &[f64],
    omega: &[f64],
    b: &Matrix,
    eps: &[f64],
) -> Result<Vec<f64>> {
    let layout = &ctx.param_layout;
    let beta = layout.beta(theta);
    let sigma = layout.log_sigma(theta).exp();
    let curve = ctx.curve(theta, omega)?;
    let mut y = Vec::with_capacity(data.n_obs());
    for i in 0..data.n_subjects() {
        for o in data.subject_range(i) {
            let mean =
                ctx.model.eval(beta, b.row(i), ctx.cov.row(o), &|g| curve.eval(g))?;
            y.push(mean + sigma * eps[o]);
        }
    }
    Ok(y)
}

/// One parameter's bootstrap summary, on the estimation scale (variance
/// parameters stay logged so the sd/SE comparison is scale-consistent).
#[derive(Clone, Debug, serde::Serialize)]
pub struct BootstrapParam {
    pub name: String,
    pub original: f64,
    pub boot_mean: f64,
    pub boot_sd: f64,
    /// Mean asymptotic standard error across replicates.
    pub mean_se: f64,
}

#[derive(Debug, serde::Serialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    pub failures: usize,
    pub params: Vec<BootstrapParam>,
    /// Per-replicate estimates, row per successful replicate.
    pub estimates: Vec<Vec<f64>>,
}

/// Parametric bootstrap around a fitted model: redraw effects and noise from
/// the estimated distributions, refit warm-started from the original
/// solution, and compare the replicate spread with the asymptotic errors.
pub fn parametric_bootstrap(
    ctx: &FitContext,
    data: &Dataset,
    fit: &FitResult,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    let layout = &ctx.param_layout;
    let dim = layout.dim();
    let m = data.n_subjects();
    let q = layout.q;
    let sd_b: Vec<f64> = layout.log_sd_b(&fit.theta).iter().map(|v| v.exp()).collect();
    let omega = ctx.psi_layout.omega(&fit.psi);

    let mut estimates: Vec<Vec<f64>> = Vec::new();
    let mut se_sum = vec![0.0; dim];
    let mut failures = 0usize;
    for rep in 0..replicates {
        let mut eff = stream(seed, Purpose::BootstrapEffects, rep as u64);
        let mut noise = stream(seed, Purpose::BootstrapNoise, rep as u64);
        let mut b = Matrix::zeros(m, q);
        for i in 0..m {
            for k in 0..q {
                b[(i, k)] = sd_b[k] * eff.sample::<f64, _>(StandardNormal);
            }
        }
        let eps: Vec<f64> =
            (0..data.n_obs()).map(|_| noise.sample::<f64, _>(StandardNormal)).collect();
        let y = bootstrap_response(ctx, data, &fit.theta, omega, &b, &eps)?;
        let rep_data = data.with_response(y)?;

        let refit = match refit_warm(ctx, &rep_data, &fit.theta, &fit.psi) {
            Ok(r) if r.converged => r,
            _ => {
                failures += 1;
                continue;
            }
        };
        match fixed_cov(ctx, &rep_data, &refit) {
            Ok(cov) => {
                let se = cov.se();
                for j in 0..dim {
                    se_sum[j] += se[j];
                }
            }
            Err(_) => {
                failures += 1;
                continue;
            }
        }
        estimates.push(refit.theta.clone());
    }

    let r = estimates.len();
    if r == 0 && replicates > 0 {
        return Err(Error::EstimationFailed(format!(
            "all {replicates} bootstrap replicates failed"
        )));
    }
    let mut params = Vec::with_capacity(dim);
    for j in 0..dim {
        let (name, _) = param_name(ctx, j);
        let mean = estimates.iter().map(|e| e[j]).sum::<f64>() / (r.max(1)) as f64;
        let sd = if r > 1 {
            (estimates.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / (r - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        params.push(BootstrapParam {
            name,
            original: fit.theta[j],
            boot_mean: mean,
            boot_sd: sd,
            mean_se: if r > 0 { se_sum[j] / r as f64 } else { 0.0 },
        });
    }
    Ok(BootstrapReport { replicates, failures, params, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit, FitConfig};
    use crate::sim::scenario::Scenario;

    fn small_fit() -> (FitContext, Dataset, FitResult) {
        let sc = Scenario::sine(6, 8, 0.3, false);
        let (data, _) = sc.generate(41, 10).unwrap();
        let config = FitConfig {
            interior_knots: 5,
            ..sc.fit_config()
        };
        let ctx = FitContext::new(config, &data).unwrap();
        let fit = fit(&ctx, &data).unwrap();
        (ctx, data, fit)
    }

    #[test]
    fn zero_noise_response_reproduces_fitted_values() {
        let (ctx, data, fit) = small_fit();
        let m = data.n_subjects();
        let q = ctx.param_layout.q;
        let mut b = Matrix::zeros(m, q);
        for i in 0..m {
            for k in 0..q {
                b[(i, k)] = fit.psi[i * q + k];
            }
        }
        let omega = ctx.psi_layout.omega(&fit.psi);
        let eps = vec![0.0; data.n_obs()];
        let y = bootstrap_response(&ctx, &data, &fit.theta, omega, &b, &eps).unwrap();
        // With the fitted effects and no noise the generator returns the
        // conditional means exactly.
        for i in 0..m {
            for o in data.subject_range(i) {
                let mean = ctx
                    .model
                    .eval(
                        ctx.param_layout.beta(&fit.theta),
                        b.row(i),
                        ctx.cov.row(o),
                        &|g| ctx.curve(&fit.theta, omega).unwrap().eval(g),
                    )
                    .unwrap();
                assert!((y[o] - mean).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn noise_scale_follows_sigma() {
        let (ctx, data, fit) = small_fit();
        let m = data.n_subjects();
        let q = ctx.param_layout.q;
        let b = Matrix::zeros(m, q);
        let omega = ctx.psi_layout.omega(&fit.psi);
        let n = data.n_obs();
        let eps: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y1 = bootstrap_response(&ctx, &data, &fit.theta, omega, &b, &vec![0.0; n]).unwrap();
        let y2 = bootstrap_response(&ctx, &data, &fit.theta, omega, &b, &eps).unwrap();
        let sigma = ctx.param_layout.log_sigma(&fit.theta).exp();
        for o in 0..n {
            let shift = (y2[o] - y1[o]).abs();
            assert!((shift - sigma).abs() < 1e-12, "shift = {shift}, sigma = {sigma}");
        }
    }

    #[test]
    fn zero_replicates_yields_empty_report() {
        let (ctx, data, fit) = small_fit();
        let report = parametric_bootstrap(&ctx, &data, &fit, 0, 5).unwrap();
        assert_eq!(report.replicates, 0);
        assert_eq!(report.failures, 0);
        assert!(report.estimates.is_empty());
        assert_eq!(report.params.len(), ctx.param_layout.dim());
        for p in &report.params {
            assert_eq!(p.boot_sd, 0.0);
        }
    }
}
