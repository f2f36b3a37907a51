//! Post-fit uncertainty. Var(theta_hat) comes from the observed information
//! (finite differences of the outer gradient). Uncertainty in the fitted
//! curve combines two sources: the curvature of the joint density around the
//! random-effect mode, and the propagation of Var(theta_hat) through the
//! mode's dependence on theta. Bands map that joint covariance through the
//! gradient of pointwise curve evaluations; the simultaneous critical value
//! is the empirical quantile of the maximal standardized deviation over
//! seeded Gaussian draws.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ad::{cross_jacobian, value_and_grad, Scalar, ScalarFn};
use crate::error::{Error, Result};
use crate::estimate::{FitContext, FitResult, JointDensity, Objective};
use crate::linalg::{cholesky, dot, sym_eigen, Matrix};
use crate::model::Dataset;
use crate::rng::{stream, Purpose};
use crate::util::{inv_normal_cdf, quantile};

/// Covariance of the outer parameter estimates, from the inverse observed
/// information.
pub struct FixedCov {
    pub cov: Matrix,
    /// Eigenvalue ratio of the information matrix; large values flag Wald
    /// intervals as unreliable.
    pub condition: f64,
}

impl FixedCov {
    /// Standard errors on the estimation scale (log scale for sd parameters).
    pub fn se(&self) -> Vec<f64> {
        (0..self.cov.rows()).map(|i| self.cov[(i, i)].max(0.0).sqrt()).collect()
    }
}

const INFO_FD_STEP: f64 = 1e-4;
/// Inner tolerance while differencing for the information matrix. The
/// half-log-determinant term is not stationary at the mode, so the marginal
/// likelihood inherits a value error proportional to the mode residual;
/// second differences amplify it by 1/(2 h s) ~ 1e7 and would swamp the soft
/// curvature directions at the estimation tolerance.
const INFO_INNER_TOL: f64 = 1e-11;

/// Observed information by central differences of the outer gradient, then
/// inversion. Errors when the information has a direction with curvature at
/// or below the relative floor.
pub fn fixed_cov(ctx: &FitContext, data: &Dataset, fit: &FitResult) -> Result<FixedCov> {
    let mut config = ctx.config.clone();
    config.inner_grad_tol = config.inner_grad_tol.min(INFO_INNER_TOL);
    let tight = FitContext::new(config, data)?;
    let ctx = &tight;
    let obj = Objective::new(ctx, data);
    let dim = ctx.param_layout.dim();
    let mut info = Matrix::zeros(dim, dim);
    for i in 0..dim {
        let step = INFO_FD_STEP * fit.theta[i].abs().max(1.0);
        let mut up = fit.theta.clone();
        let mut dn = fit.theta.clone();
        up[i] += step;
        dn[i] -= step;
        let gp = obj.fd_grad(&up, &fit.psi)?;
        let gm = obj.fd_grad(&dn, &fit.psi)?;
        for j in 0..dim {
            info[(i, j)] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    info.symmetrize();
    let eig = sym_eigen(&info)?;
    let lambda_max = eig.values[0];
    let lambda_min = eig.values[dim - 1];
    let floor = 1e-12 * lambda_max.max(0.0);
    if !(lambda_min > floor) {
        return Err(Error::SingularInformation { floor: lambda_min });
    }
    // Invert through the eigendecomposition already in hand.
    let mut cov = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += eig.vectors[(i, k)] * eig.vectors[(j, k)] / eig.values[k];
            }
            cov[(i, j)] = acc;
        }
    }
    cov.symmetrize();
    Ok(FixedCov { cov, condition: lambda_max / lambda_min })
}

/// Joint covariance of the estimation errors (psi_hat - psi, theta_hat -
/// theta): the mode-curvature block H^-1 padded with zeros, plus the
/// propagated parameter uncertainty J Var(theta_hat) J^T where J stacks
/// d psi_hat / d theta over the identity.
pub struct PredictionCov {
    /// (mq + r + dim theta)^2, psi block first.
    pub cov: Matrix,
    /// d psi_hat / d theta = -H^-1 (d^2 g / d psi d theta).
    pub dpsi_dtheta: Matrix,
}

pub fn prediction_cov(
    ctx: &FitContext,
    data: &Dataset,
    fit: &FitResult,
    fixed: &FixedCov,
) -> Result<PredictionCov> {
    let pdim = ctx.psi_layout.dim();
    let tdim = ctx.param_layout.dim();
    let g = JointDensity { ctx, data };
    let cross = cross_jacobian(&g, &fit.psi, &fit.theta)?;
    let dpsi_dtheta = fit.inner.chol.solve_matrix(&cross).scale(-1.0);

    let dim = pdim + tdim;
    let mut j_full = Matrix::zeros(dim, tdim);
    for i in 0..pdim {
        for j in 0..tdim {
            j_full[(i, j)] = dpsi_dtheta[(i, j)];
        }
    }
    for j in 0..tdim {
        j_full[(pdim + j, j)] = 1.0;
    }
    let mut cov = j_full.matmul(&fixed.cov).matmul(&j_full.transpose());
    let h_inv = fit.inner.chol.inverse();
    for i in 0..pdim {
        for j in 0..pdim {
            cov[(i, j)] += h_inv[(i, j)];
        }
    }
    cov.symmetrize();
    Ok(PredictionCov { cov, dpsi_dtheta })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandTarget {
    /// Curve at zero random effects.
    Population,
    /// Curve with one subject's predicted effects (index into the dataset's
    /// subject order).
    Subject(usize),
}

/// What to evaluate the band over: a grid of values for one covariate, the
/// remaining covariates held at fixed values.
pub struct BandRequest {
    pub target: BandTarget,
    pub grid: Vec<f64>,
    /// Covariate swept by the grid.
    pub along: String,
    /// Values for every model covariate (slot order); the swept slot is
    /// overwritten per grid point.
    pub at: Vec<f64>,
    pub alpha: f64,
    pub n_sim: usize,
    pub seed: u64,
}

pub struct Band {
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub pointwise_lo: Vec<f64>,
    pub pointwise_hi: Vec<f64>,
    pub simultaneous_lo: Vec<f64>,
    pub simultaneous_hi: Vec<f64>,
    pub critical_value: f64,
    pub alpha: f64,
    /// Grid indices with (numerically) zero standard error, excluded from
    /// the critical-value statistic.
    pub skipped: Vec<usize>,
}

/// Mean response at one covariate row as a function of the concatenated
/// vector [subject effects (optional) | omega | theta].
struct CurvePoint<'a> {
    ctx: &'a FitContext,
    row: Vec<f64>,
    with_subject: bool,
}

impl ScalarFn for CurvePoint<'_> {
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<T> {
        let ctx = self.ctx;
        let q = ctx.config.q;
        let r = ctx.psi_layout.r;
        let nb = if self.with_subject { q } else { 0 };
        let b: Vec<T> = if self.with_subject {
            x[..q].to_vec()
        } else {
            vec![T::constant(0.0); q]
        };
        let omega = &x[nb..nb + r];
        let theta = &x[nb + r..];
        let curve = ctx.curve(theta, omega)?;
        let beta = ctx.param_layout.beta(theta);
        ctx.model.eval(beta, &b, &self.row, &|g| curve.eval(g))
    }
}

/// (1-alpha) quantile of max |d_g| / se_g over draws d = B u, u standard
/// normal. `skip` marks grid points left out of the max.
pub(crate) fn simultaneous_crit(
    b_factor: &Matrix,
    se: &[f64],
    skip: &[bool],
    alpha: f64,
    n_sim: usize,
    rng: &mut impl Rng,
) -> f64 {
    let dim = b_factor.cols();
    let mut u = vec![0.0; dim];
    let mut maxima = Vec::with_capacity(n_sim);
    for _ in 0..n_sim {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut worst = 0.0f64;
        for g in 0..b_factor.rows() {
            if skip[g] {
                continue;
            }
            let d = dot(b_factor.row(g), &u);
            worst = worst.max(d.abs() / se[g]);
        }
        maxima.push(worst);
    }
    maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile(&maxima, 1.0 - alpha)
}

/// Confidence band for the population or one subject's curve over a
/// covariate grid. Pointwise limits use the normal quantile; simultaneous
/// limits replace it with a simulated critical value, which by construction
/// never falls below the pointwise one.
pub fn curve_band(
    ctx: &FitContext,
    fit: &FitResult,
    pred: &PredictionCov,
    req: &BandRequest,
) -> Result<Band> {
    let slot = ctx
        .model
        .covariates
        .iter()
        .position(|c| *c == req.along)
        .ok_or_else(|| Error::MissingColumn(req.along.clone()))?;
    if req.at.len() != ctx.model.covariates.len() {
        return Err(Error::DimensionMismatch(format!(
            "covariate template has {} values, model uses {}",
            req.at.len(),
            ctx.model.covariates.len()
        )));
    }
    if !(req.alpha > 0.0 && req.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha = {} outside (0, 1)", req.alpha)));
    }
    let lay = ctx.psi_layout;
    let (m, q, r) = (lay.m, lay.q, lay.r);
    let pdim = lay.dim();
    let tdim = ctx.param_layout.dim();
    let full_dim = pdim + tdim;
    let (subject, with_subject) = match req.target {
        BandTarget::Population => (0, false),
        BandTarget::Subject(i) => {
            if i >= m {
                return Err(Error::DimensionMismatch(format!(
                    "subject index {i} out of range (m = {m})"
                )));
            }
            (i, true)
        }
    };
    let omega_hat = lay.omega(&fit.psi);

    let ngrid = req.grid.len();
    let mut a = Matrix::zeros(ngrid, full_dim);
    let mut estimate = Vec::with_capacity(ngrid);
    for (gi, &t) in req.grid.iter().enumerate() {
        let mut row = req.at.clone();
        row[slot] = t;
        let mut x = Vec::with_capacity(full_dim);
        if with_subject {
            x.extend_from_slice(lay.b(&fit.psi, subject));
        }
        x.extend_from_slice(omega_hat);
        x.extend_from_slice(&fit.theta);
        let point = CurvePoint { ctx, row, with_subject };
        let (val, grad) = value_and_grad(&point, &x)?;
        estimate.push(val);
        let nb = if with_subject { q } else { 0 };
        if with_subject {
            for k in 0..q {
                a[(gi, subject * q + k)] = grad[k];
            }
        }
        for j in 0..r {
            a[(gi, m * q + j)] = grad[nb + j];
        }
        for j in 0..tdim {
            a[(gi, pdim + j)] = grad[nb + r + j];
        }
    }

    let a_v = a.matmul(&pred.cov);
    let mut se = Vec::with_capacity(ngrid);
    for gi in 0..ngrid {
        se.push(dot(a_v.row(gi), a.row(gi)).max(0.0).sqrt());
    }
    let z = inv_normal_cdf(1.0 - req.alpha / 2.0);
    let skip: Vec<bool> = se
        .iter()
        .zip(&estimate)
        .map(|(&s, &e)| s <= 1e-14 * (1.0 + e.abs()))
        .collect();
    let skipped: Vec<usize> =
        skip.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect();

    let crit = if skipped.len() == ngrid {
        z
    } else {
        // Factor the prediction covariance so band draws live in the full
        // parameter space; B maps standard normals to grid deviations.
        let l = match cholesky(&pred.cov) {
            Ok(ch) => ch.factor().clone(),
            Err(_) => psd_factor(&pred.cov)?,
        };
        let b_factor = a.matmul(&l);
        let mut rng = stream(req.seed, Purpose::BandDraws, 0);
        let raw = simultaneous_crit(&b_factor, &se, &skip, req.alpha, req.n_sim, &mut rng);
        raw.max(z)
    };

    let mut band = Band {
        grid: req.grid.clone(),
        estimate,
        se,
        pointwise_lo: Vec::with_capacity(ngrid),
        pointwise_hi: Vec::with_capacity(ngrid),
        simultaneous_lo: Vec::with_capacity(ngrid),
        simultaneous_hi: Vec::with_capacity(ngrid),
        critical_value: crit,
        alpha: req.alpha,
        skipped,
    };
    for gi in 0..ngrid {
        let (e, s) = (band.estimate[gi], band.se[gi]);
        band.pointwise_lo.push(e - z * s);
        band.pointwise_hi.push(e + z * s);
        band.simultaneous_lo.push(e - crit * s);
        band.simultaneous_hi.push(e + crit * s);
    }
    Ok(band)
}

/// Symmetric PSD square root for covariance factoring when Cholesky fails on
/// a semidefinite matrix; negative ripple is clipped at zero.
fn psd_factor(cov: &Matrix) -> Result<Matrix> {
    let eig = sym_eigen(cov)?;
    let n = cov.rows();
    let mut f = Matrix::zeros(n, n);
    for j in 0..n {
        let s = eig.values[j].max(0.0).sqrt();
        for i in 0..n {
            f[(i, j)] = eig.vectors[(i, j)] * s;
        }
    }
    Ok(f)
}

/// One labelled parameter with its Wald interval. The estimate and limits
/// are on the reporting scale; sd-type parameters are estimated on the log
/// scale and back-transformed, so their intervals are asymmetric.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ParamEstimate {
    pub name: String,
    pub estimate: f64,
    /// Standard error on the estimation scale.
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    /// Whether the reporting scale is exp of the estimation scale.
    pub log_scale: bool,
}

pub fn wald_ci(ctx: &FitContext, fit: &FitResult, fixed: &FixedCov, alpha: f64) -> Vec<ParamEstimate> {
    let lay = ctx.param_layout;
    let z = inv_normal_cdf(1.0 - alpha / 2.0);
    let se = fixed.se();
    let mut out = Vec::with_capacity(lay.dim());
    for i in 0..lay.dim() {
        let (name, log_scale) = param_name(ctx, i);
        let (est, lo, hi) = if log_scale {
            (
                fit.theta[i].exp(),
                (fit.theta[i] - z * se[i]).exp(),
                (fit.theta[i] + z * se[i]).exp(),
            )
        } else {
            (fit.theta[i], fit.theta[i] - z * se[i], fit.theta[i] + z * se[i])
        };
        out.push(ParamEstimate { name, estimate: est, se: se[i], lo, hi, log_scale });
    }
    out
}

/// Name and scale of the i-th outer parameter. Fixed-effect and random-
/// effect names keep the labels used in the model text.
pub fn param_name(ctx: &FitContext, i: usize) -> (String, bool) {
    let lay = ctx.param_layout;
    if i < lay.null_dim {
        return (format!("curve{}", i + 1), false);
    }
    let i2 = i - lay.null_dim;
    if i2 < lay.p {
        return (format!("beta{}", ctx.model.beta_labels[i2]), false);
    }
    let i3 = i2 - lay.p;
    if i3 == 0 {
        return ("sigma".into(), true);
    }
    let i4 = i3 - 1;
    if i4 < lay.q {
        return (format!("sd_b{}", ctx.model.b_labels[i4]), true);
    }
    ("sigma_omega".into(), true)
}

/// Marginal AIC: twice the outer parameter count plus twice the negative
/// marginal log likelihood.
pub fn marginal_aic(ctx: &FitContext, fit: &FitResult) -> f64 {
    2.0 * ctx.param_layout.dim() as f64 + 2.0 * fit.nll
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{fit, FitConfig, KnotStrategy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_equal_variance_critical_value() {
        // Independent equal variances: max of two |N(0,1)| draws. The 0.95
        // quantile solves (2 Phi(c) - 1)^2 = 0.95.
        let b = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let se = vec![1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let crit = simultaneous_crit(&b, &se, &[false, false], 0.05, 100_000, &mut rng);
        let want = inv_normal_cdf((1.0 + 0.95f64.sqrt()) / 2.0);
        assert!((want - 2.2364766445577895).abs() < 1e-9);
        assert!((crit - want).abs() < 0.02, "crit = {crit}, want {want}");
    }

    #[test]
    fn single_point_critical_value_is_the_normal_quantile() {
        let b = Matrix::from_rows(&[vec![2.0]]);
        let se = vec![2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let crit = simultaneous_crit(&b, &se, &[false], 0.05, 100_000, &mut rng);
        assert!((crit - 1.959963984540054).abs() < 0.02, "crit = {crit}");
    }

    #[test]
    fn wald_transform_for_sd_parameters() {
        let data = tiny_dataset();
        let ctx = tiny_context(&data);
        let dim = ctx.param_layout.dim();
        // Hand-built covariance: SE 0.1 everywhere.
        let fixed = FixedCov { cov: Matrix::identity(dim).scale(0.01), condition: 1.0 };
        let theta = vec![0.0; dim];
        let fit = fake_fit(&ctx, &data, &theta);
        let cis = wald_ci(&ctx, &fit, &fixed, 0.05);
        let sigma = cis.iter().find(|c| c.name == "sigma").unwrap();
        assert!((sigma.estimate - 1.0).abs() < 1e-12);
        let z = 1.959963984540054;
        assert!((sigma.lo - (-0.1 * z).exp()).abs() < 1e-12);
        assert!((sigma.hi - (0.1 * z).exp()).abs() < 1e-12);
        let beta = cis.iter().find(|c| c.name == "beta0").unwrap();
        assert!(!beta.log_scale);
        assert!((beta.hi - beta.lo - 2.0 * 0.1 * z).abs() < 1e-12);
    }

    #[test]
    fn prediction_cov_reduces_to_mode_block_without_parameter_uncertainty() {
        let data = tiny_dataset();
        let ctx = tiny_context(&data);
        let result = fit(&ctx, &data).unwrap();
        let tdim = ctx.param_layout.dim();
        let zero = FixedCov { cov: Matrix::zeros(tdim, tdim), condition: 1.0 };
        let pred = prediction_cov(&ctx, &data, &result, &zero).unwrap();
        let h_inv = result.inner.chol.inverse();
        let pdim = ctx.psi_layout.dim();
        for i in 0..pdim + tdim {
            for j in 0..pdim + tdim {
                let want = if i < pdim && j < pdim { h_inv[(i, j)] } else { 0.0 };
                assert!(
                    (pred.cov[(i, j)] - want).abs() < 1e-12,
                    "({i},{j}): {} vs {want}",
                    pred.cov[(i, j)]
                );
            }
        }
    }

    #[test]
    fn mode_sensitivity_matches_finite_differences() {
        // d psi_hat / d theta from the implicit-function formula vs. FD over
        // re-solved inner problems.
        let data = tiny_dataset();
        let ctx = tiny_context(&data);
        let result = fit(&ctx, &data).unwrap();
        let tdim = ctx.param_layout.dim();
        let fixed = FixedCov { cov: Matrix::identity(tdim), condition: 1.0 };
        let pred = prediction_cov(&ctx, &data, &result, &fixed).unwrap();
        for j in 0..tdim {
            let h = 1e-5 * result.theta[j].abs().max(1.0);
            let mut up = result.theta.clone();
            let mut dn = result.theta.clone();
            up[j] += h;
            dn[j] -= h;
            let su = crate::estimate::inner_solve(&ctx, &data, &up, &result.psi).unwrap();
            let sd = crate::estimate::inner_solve(&ctx, &data, &dn, &result.psi).unwrap();
            for i in 0..ctx.psi_layout.dim() {
                let fd = (su.psi[i] - sd.psi[i]) / (2.0 * h);
                let got = pred.dpsi_dtheta[(i, j)];
                assert!(
                    (fd - got).abs() < 1e-4 * (1.0 + fd.abs()),
                    "dpsi[{i}]/dtheta[{j}]: {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn band_invariants_and_determinism() {
        let data = tiny_dataset();
        let ctx = tiny_context(&data);
        let result = fit(&ctx, &data).unwrap();
        let fixed = fixed_cov(&ctx, &data, &result).unwrap();
        let pred = prediction_cov(&ctx, &data, &result, &fixed).unwrap();
        let req = BandRequest {
            target: BandTarget::Population,
            grid: (0..25).map(|i| i as f64 / 24.0).collect(),
            along: "t".into(),
            at: vec![0.0],
            alpha: 0.05,
            n_sim: 2000,
            seed: 11,
        };
        let band = curve_band(&ctx, &result, &pred, &req).unwrap();
        let z = 1.959963984540054;
        assert!(band.critical_value >= z);
        for g in 0..band.grid.len() {
            assert!(band.se[g] >= 0.0);
            // Pointwise half-width is exactly z * se.
            let half = band.pointwise_hi[g] - band.estimate[g];
            assert!((half - z * band.se[g]).abs() < 1e-12);
            assert!(band.simultaneous_lo[g] <= band.pointwise_lo[g] + 1e-12);
            assert!(band.simultaneous_hi[g] >= band.pointwise_hi[g] - 1e-12);
        }
        let band2 = curve_band(&ctx, &result, &pred, &req).unwrap();
        assert_eq!(band.critical_value, band2.critical_value);
        assert_eq!(band.se, band2.se);

        // Subject band differs from the population band through the random
        // effects but stays finite and ordered.
        let req_s = BandRequest { target: BandTarget::Subject(0), ..req };
        let band_s = curve_band(&ctx, &result, &pred, &req_s).unwrap();
        assert!(band_s.critical_value >= z);
        assert!(band_s.estimate.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn critical_value_nondecreasing_in_grid_refinement() {
        let data = tiny_dataset();
        let ctx = tiny_context(&data);
        let result = fit(&ctx, &data).unwrap();
        let fixed = fixed_cov(&ctx, &data, &result).unwrap();
        let pred = prediction_cov(&ctx, &data, &result, &fixed).unwrap();
        // Nested grids with a common seed: every coarse point appears in the
        // fine grid, so the fine max dominates draw by draw.
        let coarse: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        let fine: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        let mk = |grid: Vec<f64>| BandRequest {
            target: BandTarget::Population,
            grid,
            along: "t".into(),
            at: vec![0.0],
            alpha: 0.05,
            n_sim: 3000,
            seed: 21,
        };
        let b_coarse = curve_band(&ctx, &result, &pred, &mk(coarse)).unwrap();
        let b_fine = curve_band(&ctx, &result, &pred, &mk(fine)).unwrap();
        assert!(b_fine.critical_value >= b_coarse.critical_value - 1e-12);
    }

    #[test]
    fn aic_penalizes_dimension() {
        let data = tiny_dataset();
        let ctx = tiny_context(&data);
        let result = fit(&ctx, &data).unwrap();
        let aic = marginal_aic(&ctx, &result);
        assert!((aic - 2.0 * (ctx.param_layout.dim() as f64 + result.nll)).abs() < 1e-12);
    }

    fn tiny_dataset() -> Dataset {
        let mut subject = Vec::new();
        let mut y = Vec::new();
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for i in 0..6 {
            let b1: f64 = 0.3 * rng.sample::<f64, _>(StandardNormal);
            for j in 0..8 {
                let t = j as f64 / 7.0;
                let e: f64 = rng.sample(StandardNormal);
                subject.push(format!("s{i}"));
                y.push(1.0 + b1 + (2.0 * std::f64::consts::PI * t).sin() + 0.25 * e);
                rows.push(vec![t]);
            }
        }
        Dataset::from_parts(subject, y, vec!["t".into()], rows).unwrap()
    }

    fn tiny_context(data: &Dataset) -> FitContext {
        let config = FitConfig {
            model: "beta0 + b1 + f(t)".into(),
            p: 1,
            q: 1,
            interior_knots: 5,
            knots: KnotStrategy::Interval { lo: 0.0, hi: 1.0 },
            ..FitConfig::default()
        };
        FitContext::new(config, data).unwrap()
    }

    fn fake_fit(ctx: &FitContext, data: &Dataset, theta: &[f64]) -> FitResult {
        // A structurally valid FitResult at the given theta, for tests that
        // only read theta (no optimization involved).
        let psi0 = vec![0.0; ctx.psi_layout.dim()];
        let state = crate::estimate::inner_solve(ctx, data, theta, &psi0).unwrap();
        FitResult {
            theta: theta.to_vec(),
            params: crate::estimate::ParamVector::from_flat(&ctx.param_layout, theta),
            psi: state.psi.clone(),
            nll: state.value,
            grad_norm: 0.0,
            converged: true,
            outer_iterations: 0,
            nll_evals: 0,
            inner_iterations: 0,
            wall_seconds: 0.0,
            inner: state,
        }
    }
}
