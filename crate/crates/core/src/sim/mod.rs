//! Simulation studies: repeated generate-fit-band cycles with coverage
//! scoring, a parametric bootstrap, a monotonicity-weight sweep, and fit
//! timing. Replication results are deterministic for a given base seed and
//! independent of the worker count.

pub mod bootstrap;
pub mod scenario;

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit, FitContext, MonotoneConfig};
use crate::inference::{
    curve_band, fixed_cov, prediction_cov, wald_ci, Band, BandRequest, BandTarget,
    ParamEstimate,
};
use crate::model::Dataset;
use crate::util::{inv_normal_cdf, quantile};

pub use bootstrap::{parametric_bootstrap, BootstrapParam, BootstrapReport};
pub use scenario::{Scenario, ScenarioKind, Truth};

/// Band construction knobs shared by every replication.
#[derive(Clone, Debug)]
pub struct BandSettings {
    pub alpha: f64,
    /// Monte Carlo draws behind the simultaneous critical value.
    pub n_sim: usize,
    /// Grid resolution of both the band and the coverage scoring.
    pub grid_points: usize,
}

impl Default for BandSettings {
    fn default() -> Self {
        BandSettings { alpha: 0.05, n_sim: 2000, grid_points: 100 }
    }
}

/// Outcome of a single replication. `error` is set when generation or
/// fitting failed outright; such replications are excluded from coverage.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RepResult {
    pub rep: usize,
    pub seed: u64,
    pub converged: bool,
    pub error: Option<String>,
    pub nll: f64,
    pub grad_norm: f64,
    pub outer_iterations: usize,
    pub wall_seconds: f64,
    /// True population curve inside the simultaneous band at every scored
    /// grid point.
    pub population_covered: bool,
    /// Mean simultaneous band width over scored grid points.
    pub population_width: f64,
    pub critical_value: f64,
    /// Fraction of subjects whose true curve is fully inside their band.
    pub subjects_covered: f64,
    pub subject_width: f64,
    pub params: Vec<ParamEstimate>,
    pub theta: Vec<f64>,
}

impl RepResult {
    fn failed(rep: usize, seed: u64, message: String) -> Self {
        RepResult {
            rep,
            seed,
            converged: false,
            error: Some(message),
            nll: f64::NAN,
            grad_norm: f64::NAN,
            outer_iterations: 0,
            wall_seconds: f64::NAN,
            population_covered: false,
            population_width: f64::NAN,
            critical_value: f64::NAN,
            subjects_covered: 0.0,
            subject_width: f64::NAN,
            params: Vec::new(),
            theta: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ParamMedian {
    pub name: String,
    pub median: f64,
}

/// Aggregate over replications. Coverage rates come with a normal-
/// approximation binomial interval; scoring skips failed replications and
/// reports them in `failures`.
#[derive(Debug, serde::Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub replications: usize,
    pub failures: usize,
    /// Scored replications whose outer loop missed the gradient test.
    pub non_converged: usize,
    pub alpha: f64,
    pub population_coverage: f64,
    pub population_coverage_ci: (f64, f64),
    pub subject_coverage: f64,
    pub subject_coverage_ci: (f64, f64),
    pub mean_population_width: f64,
    pub mean_subject_width: f64,
    pub mean_critical_value: f64,
    pub median_wall_seconds: f64,
    /// Median reported estimate per parameter across scored replications.
    pub param_medians: Vec<ParamMedian>,
    pub reps: Vec<RepResult>,
}

/// Covariate template for the population curve: zeros everywhere, which
/// puts binary and centered covariates at their reference level. The swept
/// slot is overwritten per grid point.
fn population_template(ctx: &FitContext) -> Vec<f64> {
    vec![0.0; ctx.model.covariates.len()]
}

/// Coverage indicator and mean simultaneous width against a true curve on
/// the band grid. Grid points with numerically zero standard error carry no
/// information and are left out.
fn score_band(band: &Band, truth: &[f64]) -> (bool, f64) {
    debug_assert_eq!(band.grid.len(), truth.len());
    let mut covered = true;
    let mut width_sum = 0.0;
    let mut used = 0usize;
    for g in 0..band.grid.len() {
        if band.skipped.contains(&g) {
            continue;
        }
        if truth[g] < band.simultaneous_lo[g] || truth[g] > band.simultaneous_hi[g] {
            covered = false;
        }
        width_sum += band.simultaneous_hi[g] - band.simultaneous_lo[g];
        used += 1;
    }
    (covered, if used > 0 { width_sum / used as f64 } else { f64::NAN })
}

fn run_one(sc: &Scenario, rep: usize, rep_seed: u64, band: &BandSettings) -> RepResult {
    match try_run_one(sc, rep, rep_seed, band) {
        Ok(r) => r,
        Err(e) => RepResult::failed(rep, rep_seed, e.to_string()),
    }
}

fn try_run_one(
    sc: &Scenario,
    rep: usize,
    rep_seed: u64,
    band: &BandSettings,
) -> Result<RepResult> {
    let t0 = Instant::now();
    let (data, truth) = sc.generate(rep_seed, band.grid_points)?;
    let ctx = FitContext::new(sc.fit_config(), &data)?;
    let fit = fit(&ctx, &data)?;
    let fixed = fixed_cov(&ctx, &data, &fit)?;
    let pred = prediction_cov(&ctx, &data, &fit, &fixed)?;
    let params = wald_ci(&ctx, &fit, &fixed, band.alpha);

    let along = sc.time_column().to_string();
    let pop_req = BandRequest {
        target: BandTarget::Population,
        grid: truth.grid.clone(),
        along: along.clone(),
        at: population_template(&ctx),
        alpha: band.alpha,
        n_sim: band.n_sim,
        seed: rep_seed,
    };
    let pop = curve_band(&ctx, &fit, &pred, &pop_req)?;
    let (population_covered, population_width) = score_band(&pop, &truth.population);

    let m = data.n_subjects();
    let mut covered = 0usize;
    let mut width_sum = 0.0;
    for i in 0..m {
        let first = data.subject_range(i).start;
        let req = BandRequest {
            target: BandTarget::Subject(i),
            grid: truth.grid.clone(),
            along: along.clone(),
            at: ctx.cov.row(first).to_vec(),
            alpha: band.alpha,
            n_sim: band.n_sim,
            seed: rep_seed,
        };
        let sb = curve_band(&ctx, &fit, &pred, &req)?;
        let (cov_i, w_i) = score_band(&sb, &truth.subjects[i]);
        covered += usize::from(cov_i);
        width_sum += w_i;
    }

    Ok(RepResult {
        rep,
        seed: rep_seed,
        converged: fit.converged,
        error: None,
        nll: fit.nll,
        grad_norm: fit.grad_norm,
        outer_iterations: fit.outer_iterations,
        wall_seconds: t0.elapsed().as_secs_f64(),
        population_covered,
        population_width,
        critical_value: pop.critical_value,
        subjects_covered: covered as f64 / m as f64,
        subject_width: width_sum / m as f64,
        params,
        theta: fit.theta,
    })
}

/// Normal-approximation binomial interval, clipped to [0, 1].
fn binomial_ci(successes: usize, trials: usize) -> (f64, f64, f64) {
    if trials == 0 {
        return (f64::NAN, 0.0, 1.0);
    }
    let p = successes as f64 / trials as f64;
    let z = inv_normal_cdf(0.975);
    let half = z * (p * (1.0 - p) / trials as f64).sqrt();
    (p, (p - half).max(0.0), (p + half).min(1.0))
}

/// Repeated generate-fit-band study. Replication `rep` uses seed
/// `base_seed + rep`, so results are reproducible and independent of the
/// worker count; workers only set the thread pool size.
pub fn run_replications(
    sc: &Scenario,
    replications: usize,
    base_seed: u64,
    band: &BandSettings,
    workers: usize,
) -> Result<SimReport> {
    sc.validate()?;
    if !(band.alpha > 0.0 && band.alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "band alpha = {} outside (0, 1)",
            band.alpha
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let reps: Vec<RepResult> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|rep| run_one(sc, rep, base_seed.wrapping_add(rep as u64), band))
            .collect()
    });
    Ok(summarize(sc, band, reps))
}

fn summarize(sc: &Scenario, band: &BandSettings, reps: Vec<RepResult>) -> SimReport {
    let scored: Vec<&RepResult> = reps.iter().filter(|r| r.error.is_none()).collect();
    let failures = reps.len() - scored.len();
    let non_converged = scored.iter().filter(|r| !r.converged).count();
    let m = sc.m;

    let pop_hits = scored.iter().filter(|r| r.population_covered).count();
    let (population_coverage, plo, phi) = binomial_ci(pop_hits, scored.len());
    let subj_hits: f64 = scored.iter().map(|r| r.subjects_covered * m as f64).sum();
    let (subject_coverage, slo, shi) =
        binomial_ci(subj_hits.round() as usize, scored.len() * m);

    let mean = |f: &dyn Fn(&RepResult) -> f64| -> f64 {
        if scored.is_empty() {
            f64::NAN
        } else {
            scored.iter().map(|r| f(r)).sum::<f64>() / scored.len() as f64
        }
    };
    let mut walls: Vec<f64> = scored.iter().map(|r| r.wall_seconds).collect();
    walls.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut param_medians = Vec::new();
    if let Some(first) = scored.first() {
        for (j, p) in first.params.iter().enumerate() {
            let mut vals: Vec<f64> = scored.iter().map(|r| r.params[j].estimate).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            param_medians
                .push(ParamMedian { name: p.name.clone(), median: quantile(&vals, 0.5) });
        }
    }

    SimReport {
        scenario: sc.label(),
        replications: reps.len(),
        failures,
        non_converged,
        alpha: band.alpha,
        population_coverage,
        population_coverage_ci: (plo, phi),
        subject_coverage,
        subject_coverage_ci: (slo, shi),
        mean_population_width: mean(&|r| r.population_width),
        mean_subject_width: mean(&|r| r.subject_width),
        mean_critical_value: mean(&|r| r.critical_value),
        median_wall_seconds: if walls.is_empty() {
            f64::NAN
        } else {
            quantile(&walls, 0.5)
        },
        param_medians,
        reps,
    }
}

/// One fit of the data at a given monotonicity weight.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MonotoneRun {
    pub weight: f64,
    /// Most negative fitted slope over the curve-argument range.
    pub min_slope: f64,
    pub nll: f64,
    pub converged: bool,
    pub wall_seconds: f64,
}

/// Fits one generated dataset under increasing monotonicity weights and
/// tracks the most negative slope of the fitted curve, measured on a fine
/// grid over the curve-argument range at zero effects.
pub fn monotone_sweep(
    sc: &Scenario,
    weights: &[f64],
    seed: u64,
    slope_grid: usize,
) -> Result<Vec<MonotoneRun>> {
    let (data, _) = sc.generate(seed, 2)?;
    let mut out = Vec::with_capacity(weights.len());
    for &w in weights {
        let mut config = sc.fit_config();
        config.monotone = Some(MonotoneConfig { weight: w, ..MonotoneConfig::default() });
        let ctx = FitContext::new(config, &data)?;
        let t0 = Instant::now();
        let fit = fit(&ctx, &data)?;
        let omega = ctx.psi_layout.omega(&fit.psi);
        let curve = ctx.curve::<f64>(&fit.theta, omega)?;
        let (lo, hi) = ctx.t_bounds;
        let mut min_slope = f64::INFINITY;
        for g in 0..slope_grid {
            let x = lo + (hi - lo) * g as f64 / (slope_grid - 1) as f64;
            min_slope = min_slope.min(curve.eval_deriv(x)?);
        }
        out.push(MonotoneRun {
            weight: w,
            min_slope,
            nll: fit.nll,
            converged: fit.converged,
            wall_seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct BenchRow {
    pub label: String,
    pub subjects: usize,
    pub observations: usize,
    pub replications: usize,
    pub failures: usize,
    pub q1_seconds: f64,
    pub median_seconds: f64,
    pub q3_seconds: f64,
}

/// Serial fit timing per scenario (quartiles over replications). Bands are
/// skipped; this times estimation only.
pub fn benchmark(scenarios: &[Scenario], replications: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        sc.validate()?;
        let mut times = Vec::with_capacity(replications);
        let mut failures = 0usize;
        let mut observations = 0usize;
        for rep in 0..replications {
            let (data, _) = sc.generate(seed.wrapping_add(rep as u64), 2)?;
            observations = data.n_obs();
            let ctx = FitContext::new(sc.fit_config(), &data)?;
            let t0 = Instant::now();
            match fit(&ctx, &data) {
                Ok(f) if f.converged => times.push(t0.elapsed().as_secs_f64()),
                _ => failures += 1,
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quart = |p: f64| if times.is_empty() { f64::NAN } else { quantile(&times, p) };
        rows.push(BenchRow {
            label: sc.label(),
            subjects: sc.m,
            observations,
            replications,
            failures,
            q1_seconds: quart(0.25),
            median_seconds: quart(0.5),
            q3_seconds: quart(0.75),
        });
    }
    Ok(rows)
}

/// Convenience wrapper: generate one dataset, fit it, and bootstrap around
/// the fit.
pub fn scenario_bootstrap(
    sc: &Scenario,
    replicates: usize,
    seed: u64,
) -> Result<(Dataset, BootstrapReport)> {
    let (data, _) = sc.generate(seed, 2)?;
    let ctx = FitContext::new(sc.fit_config(), &data)?;
    let fitted = fit(&ctx, &data)?;
    let report = parametric_bootstrap(&ctx, &data, &fitted, replicates, seed)?;
    Ok((data, report))
}
