use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimate::{FitConfig, KnotStrategy, MonotoneConfig};
use crate::linalg::Matrix;
use crate::model::Dataset;
use crate::rng::{stream, Purpose};
use crate::splines::uniform_grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Vertical shift, scale, and phase warp around a sine; the curve
    /// argument stays inside [-1, 1] so knots sit on a fixed interval.
    Sine,
    /// Vertical and horizontal shift around a Gaussian bump; the argument is
    /// unbounded, exercising the adaptive knot standardization.
    Bell,
    /// Increasing cubic with a small subject level; used for the
    /// monotonicity-penalty demonstration.
    CubicMonotone,
    /// Infant-growth-style synthetic data: visit schedule in weeks, sex and
    /// gestational-age covariates, level and timing random effects.
    SmoccSynthetic,
}

/// One simulation setting. Random effects are drawn with standard deviation
/// sigma * sqrt(d_k), i.e. `d` holds variance ratios relative to the noise.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub m: usize,
    /// Time-grid resolution: subjects share the points t_i, i = 0..=n.
    pub n: usize,
    /// Error standard deviation.
    pub sigma: f64,
    /// Random-effect covariance diagonal, as ratios to sigma^2.
    pub d: Vec<f64>,
}

pub const SINE_LOW_D: [f64; 3] = [0.25, 0.16, 0.04];
pub const SINE_HIGH_D: [f64; 3] = [1.0, 0.25, 0.16];
pub const BELL_D: [f64; 2] = [2.0, 2.0];

/// Generator values for the growth scenario, natural scale.
pub const SMOCC_BETA: [f64; 4] = [68.2, 1.80, 0.00, 1.00];
pub const SMOCC_SD_B: [f64; 2] = [2.86, 3.28];
pub const SMOCC_SIGMA: f64 = 1.05;
/// Clinic visit schedule in weeks from birth.
pub const SMOCC_WEEKS: [f64; 10] = [0.0, 4.0, 8.0, 13.0, 26.0, 39.0, 52.0, 65.0, 78.0, 104.0];

impl Scenario {
    pub fn sine(m: usize, n: usize, sigma: f64, high_variance: bool) -> Self {
        let d = if high_variance { SINE_HIGH_D } else { SINE_LOW_D };
        Scenario { kind: ScenarioKind::Sine, m, n, sigma, d: d.to_vec() }
    }

    pub fn bell(m: usize, n: usize, sigma: f64) -> Self {
        Scenario { kind: ScenarioKind::Bell, m, n, sigma, d: BELL_D.to_vec() }
    }

    pub fn cubic(m: usize, n: usize, sigma: f64) -> Self {
        Scenario { kind: ScenarioKind::CubicMonotone, m, n, sigma, d: vec![0.25] }
    }

    pub fn smocc(m: usize) -> Self {
        let s = SMOCC_SIGMA;
        let d = vec![(SMOCC_SD_B[0] / s).powi(2), (SMOCC_SD_B[1] / s).powi(2)];
        Scenario { kind: ScenarioKind::SmoccSynthetic, m, n: SMOCC_WEEKS.len() - 1, sigma: s, d }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidConfig("scenario sigma must be positive".into()));
        }
        if self.d.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("scenario D entries must be nonnegative".into()));
        }
        if self.d.len() != self.q() {
            return Err(Error::InvalidConfig(format!(
                "scenario needs {} D entries, got {}",
                self.q(),
                self.d.len()
            )));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("scenario needs m >= 1 and n >= 1".into()));
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        match self.kind {
            ScenarioKind::Sine => 3,
            ScenarioKind::Bell | ScenarioKind::SmoccSynthetic => 2,
            ScenarioKind::CubicMonotone => 1,
        }
    }

    pub fn label(&self) -> String {
        let kind = match self.kind {
            ScenarioKind::Sine => "sine",
            ScenarioKind::Bell => "bell",
            ScenarioKind::CubicMonotone => "cubic",
            ScenarioKind::SmoccSynthetic => "smocc",
        };
        format!("{kind}_m{}_n{}_s{:.3}", self.m, self.n, self.sigma)
    }

    /// Name of the covariate the curve runs along.
    pub fn time_column(&self) -> &'static str {
        match self.kind {
            ScenarioKind::Sine | ScenarioKind::Bell => "t",
            ScenarioKind::CubicMonotone => "x",
            ScenarioKind::SmoccSynthetic => "age",
        }
    }

    /// Domain of the population curve, also the coverage-scoring range.
    pub fn time_range(&self) -> (f64, f64) {
        match self.kind {
            ScenarioKind::Sine => (0.0, 1.0),
            ScenarioKind::Bell => (-4.0, 4.0),
            ScenarioKind::CubicMonotone => (-2.0, 2.0),
            ScenarioKind::SmoccSynthetic => (0.0, *SMOCC_WEEKS.last().unwrap()),
        }
    }

    /// Shared observation times.
    pub fn times(&self) -> Vec<f64> {
        match self.kind {
            ScenarioKind::SmoccSynthetic => SMOCC_WEEKS.to_vec(),
            _ => {
                let (a, b) = self.time_range();
                uniform_grid(a, b, self.n + 1)
            }
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let base = FitConfig::default();
        match self.kind {
            ScenarioKind::Sine => FitConfig {
                model: "beta0 + b1 + exp(b2) * f(t - ilogit(b3))".into(),
                p: 1,
                q: 3,
                knots: KnotStrategy::Interval { lo: -1.0, hi: 1.0 },
                ..base
            },
            ScenarioKind::Bell => FitConfig {
                model: "beta0 + b1 + f(t - b2)".into(),
                p: 1,
                q: 2,
                knots: KnotStrategy::Scaled { c: 3.0 },
                ..base
            },
            ScenarioKind::CubicMonotone => FitConfig {
                model: "beta0 + b1 + f(x)".into(),
                p: 1,
                q: 1,
                knots: KnotStrategy::Interval { lo: -2.0, hi: 2.0 },
                monotone: Some(MonotoneConfig::default()),
                ..base
            },
            ScenarioKind::SmoccSynthetic => FitConfig {
                model: "beta0 + beta1*sex + b1 + exp(beta2*sex) * f(age + beta3*ga + b2)".into(),
                p: 4,
                q: 2,
                knots: KnotStrategy::Scaled { c: 3.0 },
                ..base
            },
        }
    }

    /// Data plus the generating curves evaluated on a scoring grid.
    pub fn generate(&self, seed: u64, grid_points: usize) -> Result<(Dataset, Truth)> {
        self.validate()?;
        let m = self.m;
        let q = self.q();
        let times = self.times();
        let (lo, hi) = self.time_range();
        let grid = uniform_grid(lo, hi, grid_points);

        let mut eff = stream(seed, Purpose::SubjectEffects, 0);
        let mut noise = stream(seed, Purpose::Noise, 0);
        let mut covs = stream(seed, Purpose::Covariates, 0);

        let sd: Vec<f64> = self.d.iter().map(|&v| self.sigma * v.sqrt()).collect();
        let mut b = Matrix::zeros(m, q);
        for i in 0..m {
            for k in 0..q {
                b[(i, k)] = sd[k] * eff.sample::<f64, _>(StandardNormal);
            }
        }

        // Subject-level covariates (growth scenario only).
        let (sex, ga): (Vec<f64>, Vec<f64>) = if self.kind == ScenarioKind::SmoccSynthetic {
            let sex = (0..m).map(|_| f64::from(covs.gen_bool(0.5))).collect();
            let ga = (0..m).map(|_| 1.5 * covs.sample::<f64, _>(StandardNormal)).collect();
            (sex, ga)
        } else {
            (Vec::new(), Vec::new())
        };

        let mut subject = Vec::with_capacity(m * times.len());
        let mut y = Vec::with_capacity(m * times.len());
        let mut rows = Vec::with_capacity(m * times.len());
        for i in 0..m {
            for &t in &times {
                let mean = self.subject_mean(t, b.row(i), &sex, &ga, i);
                let e: f64 = noise.sample(StandardNormal);
                subject.push(format!("s{i:04}"));
                y.push(mean + self.sigma * e);
                rows.push(match self.kind {
                    ScenarioKind::SmoccSynthetic => vec![t, sex[i], ga[i]],
                    _ => vec![t],
                });
            }
        }
        let columns: Vec<String> = match self.kind {
            ScenarioKind::SmoccSynthetic => {
                vec!["age".into(), "sex".into(), "ga".into()]
            }
            ScenarioKind::CubicMonotone => vec!["x".into()],
            _ => vec!["t".into()],
        };
        let data = Dataset::from_parts(subject, y, columns, rows)?;

        let population: Vec<f64> =
            grid.iter().map(|&t| self.population_mean(t)).collect();
        let subjects: Vec<Vec<f64>> = (0..m)
            .map(|i| grid.iter().map(|&t| self.subject_mean(t, b.row(i), &sex, &ga, i)).collect())
            .collect();
        Ok((data, Truth { grid, population, subjects, b }))
    }

    /// Generating mean for one subject at time t.
    fn subject_mean(&self, t: f64, b: &[f64], sex: &[f64], ga: &[f64], i: usize) -> f64 {
        match self.kind {
            ScenarioKind::Sine => {
                let phase = inv_logit(b[2]);
                1.0 + b[0] + b[1].exp() * (2.0 * std::f64::consts::PI * (t - phase)).sin()
            }
            ScenarioKind::Bell => 1.0 + b[0] + (-0.5 * (t - b[1]) * (t - b[1])).exp(),
            ScenarioKind::CubicMonotone => t * t * t - t + b[0],
            ScenarioKind::SmoccSynthetic => {
                let [b0, b1, b2, b3] = SMOCC_BETA;
                b0 + b1 * sex[i]
                    + b[0]
                    + (b2 * sex[i]).exp() * growth_curve(t + b3 * ga[i] + b[1])
            }
        }
    }

    /// Generating mean at zero random effects and reference covariates.
    pub fn population_mean(&self, t: f64) -> f64 {
        match self.kind {
            ScenarioKind::Sine => {
                1.0 + (2.0 * std::f64::consts::PI * (t - 0.5)).sin()
            }
            ScenarioKind::Bell => 1.0 + (-0.5 * t * t).exp(),
            ScenarioKind::CubicMonotone => t * t * t - t,
            ScenarioKind::SmoccSynthetic => SMOCC_BETA[0] + growth_curve(t),
        }
    }
}

/// Generating curves evaluated on a common scoring grid, plus the effect
/// draws behind them.
pub struct Truth {
    pub grid: Vec<f64>,
    pub population: Vec<f64>,
    /// Per-subject curve over the grid, at the subject's own covariates.
    pub subjects: Vec<Vec<f64>>,
    /// m x q random-effect draws.
    pub b: Matrix,
}

fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth growth shape for the synthetic infant data, centered so its mean
/// over the visit window is zero and the intercept carries the level.
pub fn growth_curve(age_weeks: f64) -> f64 {
    const RATE: f64 = 0.0174;
    const SPAN: f64 = 42.0;
    const TOP: f64 = 92.0;
    let horizon = *SMOCC_WEEKS.last().unwrap();
    let level = |a: f64| TOP - SPAN * (-RATE * a).exp();
    let mean = TOP - SPAN * (1.0 - (-RATE * horizon).exp()) / (RATE * horizon);
    level(age_weeks) - mean
}
