use crate::ad::{Scalar, ScalarFn2};
use crate::error::Result;
use crate::estimate::FitContext;
use crate::model::Dataset;

const LOG_2PI: f64 = 1.8378770664093453;

/// Negative log of the joint density of (y, b, omega) given theta:
///
/// (N + mq + r)/2 log 2pi + (N + mq) log sigma + m sum_k (log sd_k - log sigma)
///   + r log sigma_omega
///   + |y - eta|^2 / (2 sigma^2) + sum b_ik^2 / (2 sd_k^2)
///   + |omega|^2 / (2 sigma_omega^2)
///   + monotonicity penalty.
///
/// The middle line is (1/2) log|G| - (r/2) log lambda for the variance-ratio
/// matrix G and lambda = sigma_omega^-2, written directly in log scales.
pub struct JointDensity<'a> {
    pub ctx: &'a FitContext,
    pub data: &'a Dataset,
}

impl ScalarFn2 for JointDensity<'_> {
    fn eval2<T: Scalar>(&self, psi: &[T], theta: &[T]) -> Result<T> {
        let ctx = self.ctx;
        let play = &ctx.param_layout;
        let slay = &ctx.psi_layout;
        debug_assert_eq!(psi.len(), slay.dim());
        debug_assert_eq!(theta.len(), play.dim());

        let n_obs = self.data.n_obs() as f64;
        let m = slay.m;
        let q = slay.q;
        let r = slay.r;
        let mq = (m * q) as f64;

        let beta = play.beta(theta);
        let log_sigma = play.log_sigma(theta);
        let log_sd = play.log_sd_b(theta);
        let log_sigma_omega = play.log_sigma_omega(theta);
        let omega = slay.omega(psi);

        let curve = ctx.curve(theta, omega)?;
        let spline = |u: T| curve.eval(u);

        // Residual sum of squares.
        let mut rss = T::constant(0.0);
        let y = self.data.y();
        for i in 0..m {
            let b_i = slay.b(psi, i);
            for obs in self.data.subject_range(i) {
                let eta = ctx.model.eval(beta, b_i, ctx.cov.row(obs), &spline)?;
                let resid = T::constant(y[obs]) - eta;
                rss = rss + resid * resid;
            }
        }

        let half = T::constant(0.5);
        let two = T::constant(2.0);
        let mut nld = T::constant((n_obs + mq + r as f64) / 2.0 * LOG_2PI);
        nld = nld + T::constant(n_obs + mq) * log_sigma;
        for k in 0..q {
            nld = nld + T::constant(m as f64) * (log_sd[k] - log_sigma);
        }
        nld = nld + T::constant(r as f64) * log_sigma_omega;
        nld = nld + half * (-two * log_sigma).exp() * rss;
        for k in 0..q {
            let prec = (-two * log_sd[k]).exp();
            let mut ss = T::constant(0.0);
            for i in 0..m {
                let b = slay.b(psi, i)[k];
                ss = ss + b * b;
            }
            nld = nld + half * prec * ss;
        }
        let mut w2 = T::constant(0.0);
        for &w in omega {
            w2 = w2 + w * w;
        }
        nld = nld + half * (-two * log_sigma_omega).exp() * w2;

        if ctx.config.monotone.is_some() {
            let coef = ctx.full_coefficients(play.theta_f(theta), omega);
            nld = nld + ctx.monotone_penalty(&coef);
        }
        Ok(nld)
    }
}
