use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::estimate::{FitConfig, KnotStrategy, ParamLayout, PsiLayout};
use crate::linalg::Matrix;
use crate::model::{parse_model, CompiledModel, Dataset};
use crate::splines::{
    difference_penalty, sum_to_zero_transform, uniform_grid, BasisSpec, ConstraintTransform,
    PenaltyDecomposition,
};

/// Everything the objective needs that does not change across evaluations:
/// the compiled model, the basis and its penalty decomposition, covariate
/// values in model order, argument bounds for knot scaling, and the
/// first-derivative rows of the monotonicity grid.
pub struct FitContext {
    pub config: FitConfig,
    pub model: CompiledModel,
    pub basis: BasisSpec,
    pub constraint: Option<ConstraintTransform>,
    pub penalty: PenaltyDecomposition,
    /// N x (model covariate count) values, model slot order.
    pub cov: Matrix,
    /// Data range of the curve argument at zero effects (Scaled knots only;
    /// for Interval knots this simply mirrors the interval).
    pub t_bounds: (f64, f64),
    /// First-derivative basis rows on the monotonicity grid.
    pub mono_rows: Option<Matrix>,
    pub param_layout: ParamLayout,
    pub psi_layout: PsiLayout,
}

impl FitContext {
    pub fn new(config: FitConfig, data: &Dataset) -> Result<Self> {
        config.validate()?;
        let expr = parse_model(&config.model)?;
        let model = CompiledModel::compile(expr, config.p, config.q, data.columns())?;

        let n = data.n_obs();
        let mut cov = Matrix::zeros(n, model.covariates.len());
        for (slot, name) in model.covariates.iter().enumerate() {
            let col = data.column_values(name)?;
            for (i, v) in col.into_iter().enumerate() {
                cov[(i, slot)] = v;
            }
        }

        // Knot range: fixed interval, or the unit interval fed by the scaled
        // argument whose raw bounds come from the data at zero effects.
        let zero_beta = vec![0.0; config.p];
        let zero_b = vec![0.0; config.q];
        let (basis, t_bounds) = match config.knots {
            KnotStrategy::Interval { lo, hi } => (
                BasisSpec::uniform(config.degree, config.interior_knots, lo, hi)?,
                (lo, hi),
            ),
            KnotStrategy::Scaled { .. } => {
                let mut t_min = f64::INFINITY;
                let mut t_max = f64::NEG_INFINITY;
                for i in 0..n {
                    let g = model.eval_spline_arg::<f64>(&zero_beta, &zero_b, cov.row(i))?;
                    t_min = t_min.min(g);
                    t_max = t_max.max(g);
                }
                if !(t_max > t_min) {
                    return Err(Error::DegenerateRange { span: t_max - t_min });
                }
                (
                    BasisSpec::uniform(config.degree, config.interior_knots, 0.0, 1.0)?,
                    (t_min, t_max),
                )
            }
        };

        let k = basis.num_basis();
        let s_full = difference_penalty(k, config.penalty_order)?;
        let (constraint, s_eff) = if config.sum_to_zero {
            let tr = sum_to_zero_transform(&basis, 1000)?;
            let s_eff = tr.z().transpose().matmul(&s_full).matmul(tr.z());
            (Some(tr), s_eff)
        } else {
            (None, s_full)
        };
        let penalty = PenaltyDecomposition::new(&s_eff)?;

        let mono_rows = match &config.monotone {
            Some(mc) => {
                let (a, b) = basis.domain();
                let grid = uniform_grid(a, b, mc.grid_points);
                Some(basis.basis_matrix(&grid, 1, false)?)
            }
            None => None,
        };

        let param_layout =
            ParamLayout { null_dim: penalty.null_dim(), p: config.p, q: config.q };
        let psi_layout =
            PsiLayout { m: data.n_subjects(), q: config.q, r: penalty.rank() };

        Ok(FitContext {
            config,
            model,
            basis,
            constraint,
            penalty,
            cov,
            t_bounds,
            mono_rows,
            param_layout,
            psi_layout,
        })
    }

    /// Standard deviation aggregate of the random effects entering the curve
    /// argument: sqrt of the summed variances. Zero when the argument holds
    /// no random effects.
    pub fn sigma_shift<T: Scalar>(&self, theta: &[T]) -> T {
        let log_sd = self.param_layout.log_sd_b(theta);
        if self.model.b_in_spline.is_empty() {
            return T::constant(0.0);
        }
        let mut acc = T::constant(0.0);
        for &slot in &self.model.b_in_spline {
            let two = T::constant(2.0);
            acc = acc + (two * log_sd[slot]).exp();
        }
        acc.sqrt()
    }

    /// Full K-vector of spline coefficients from the unpenalized and
    /// penalized coordinates (applying the sum-to-zero expansion if active).
    pub fn full_coefficients<T: Scalar>(&self, theta_f: &[T], omega: &[T]) -> Vec<T> {
        let v = self.penalty.coefficients(theta_f, omega);
        match &self.constraint {
            Some(tr) => tr.expand(&v),
            None => v,
        }
    }

    /// Curve evaluator bound to one set of parameter values.
    pub fn curve<'c, T: Scalar>(
        &'c self,
        theta: &[T],
        omega: &[T],
    ) -> Result<CurveEvaluator<'c, T>> {
        let lay = &self.param_layout;
        let coef = self.full_coefficients(lay.theta_f(theta), omega);
        let scale = match self.config.knots {
            KnotStrategy::Interval { .. } => None,
            KnotStrategy::Scaled { c } => {
                let shift = T::constant(c) * self.sigma_shift(theta);
                let lo = T::constant(self.t_bounds.0) - shift;
                let hi = T::constant(self.t_bounds.1) + shift;
                let span = (hi - lo).value();
                if !(span > 1e-12) {
                    return Err(Error::DegenerateRange { span });
                }
                Some((lo, T::constant(1.0) / (hi - lo)))
            }
        };
        Ok(CurveEvaluator {
            basis: &self.basis,
            extrapolate: self.config.extrapolate,
            coef,
            scale,
        })
    }

    /// Monotonicity penalty of a full coefficient vector:
    /// weight * sum over the grid of smooth_neg(f'(x_g))^2.
    pub fn monotone_penalty<T: Scalar>(&self, coef: &[T]) -> T {
        let (Some(mc), Some(rows)) = (&self.config.monotone, &self.mono_rows) else {
            return T::constant(0.0);
        };
        if mc.weight == 0.0 {
            return T::constant(0.0);
        }
        let mut acc = T::constant(0.0);
        for g in 0..rows.rows() {
            let row = rows.row(g);
            let mut slope = T::constant(0.0);
            for (j, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    slope = slope + T::constant(w) * coef[j];
                }
            }
            let s = slope.smooth_neg(mc.epsilon);
            acc = acc + s * s;
        }
        T::constant(mc.weight) * acc
    }
}

/// Spline curve bound to concrete coefficients and (optionally) the affine
/// argument scaling; maps the raw argument gamma to f(gamma).
pub struct CurveEvaluator<'c, T: Scalar> {
    basis: &'c BasisSpec,
    extrapolate: bool,
    pub coef: Vec<T>,
    scale: Option<(T, T)>,
}

impl<T: Scalar> CurveEvaluator<'_, T> {
    pub fn eval(&self, gamma: T) -> Result<T> {
        self.combine(gamma, 0)
    }

    /// Slope with respect to the raw argument; the chain factor of the
    /// affine standardization is folded in.
    pub fn eval_deriv(&self, gamma: T) -> Result<T> {
        let d = self.combine(gamma, 1)?;
        Ok(match &self.scale {
            Some((_, inv_span)) => d * *inv_span,
            None => d,
        })
    }

    fn combine(&self, gamma: T, deriv: usize) -> Result<T> {
        let u = match &self.scale {
            Some((lo, inv_span)) => (gamma - *lo) * *inv_span,
            None => gamma,
        };
        let row = self.basis.eval_row(u, deriv, self.extrapolate)?;
        let mut acc = T::constant(0.0);
        for (r, c) in row.into_iter().zip(&self.coef) {
            acc = acc + r * *c;
        }
        Ok(acc)
    }
}
