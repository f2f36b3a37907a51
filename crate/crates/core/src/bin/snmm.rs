//! Command-line front end: fit models on CSV data, run scenario
//! simulations, bootstrap, predict bands, and benchmark.
//!
//! Every command is driven by one config file plus a seed, and writes its
//! results under the output directory. Numeric CSV cells use a fixed
//! 12-significant-digit format and JSON objects keep sorted keys, so a rerun
//! with identical inputs reproduces the files byte for byte (timing fields
//! live only in report JSONs). Exit codes: 0 success, 2 config error,
//! 3 data error, 4 estimation trouble (outputs are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use snmm::config::{Command, RunConfig, SubjectSelect};
use snmm::estimate::{fit, FitContext, FitResult};
use snmm::inference::{
    curve_band, fixed_cov, marginal_aic, param_name, prediction_cov, wald_ci, Band, BandRequest,
    BandTarget, FixedCov, ParamEstimate,
};
use snmm::model::{spline_covariate, Dataset};
use snmm::sim::{benchmark, monotone_sweep, parametric_bootstrap, run_replications};
use snmm::splines::uniform_grid;
use snmm::util::{format_sig, round_sig};

#[derive(Parser)]
#[command(
    name = "snmm",
    version,
    about = "Semiparametric nonlinear mixed-effects models: a penalized-spline population curve warped by subject-specific random effects"
)]
struct Args {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the worker count from the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Replaces the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Fail {
    code: u8,
    message: String,
}

fn config_fail(e: impl std::fmt::Display) -> Fail {
    Fail { code: 2, message: format!("config error: {e}") }
}

fn data_fail(e: impl std::fmt::Display) -> Fail {
    Fail { code: 3, message: format!("data error: {e}") }
}

fn estimation_fail(e: impl std::fmt::Display) -> Fail {
    Fail { code: 4, message: format!("estimation error: {e}") }
}

fn io_fail(path: &Path, e: std::io::Error) -> Fail {
    Fail { code: 3, message: format!("cannot write {}: {e}", path.display()) }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(args: &Args) -> Result<(), Fail> {
    let mut cfg = RunConfig::load(&args.config).map_err(config_fail)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(config_fail("workers must be at least 1"));
        }
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    fs::create_dir_all(&cfg.out)
        .map_err(|e| config_fail(format!("cannot create {}: {e}", cfg.out.display())))?;

    let meta = Meta {
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.fingerprint(),
        seed: cfg.seed,
    };
    match cfg.command {
        Command::Fit => cmd_fit(&cfg, &meta),
        Command::Predict => cmd_predict(&cfg, &meta),
        Command::Bootstrap => cmd_bootstrap(&cfg, &meta),
        Command::Simulate => cmd_simulate(&cfg, &meta),
        Command::Benchmark => cmd_benchmark(&cfg, &meta),
    }
}

/// Provenance stamped into every output file.
struct Meta {
    version: &'static str,
    config_sha256: String,
    seed: u64,
}

impl Meta {
    fn csv_comments(&self) -> Vec<String> {
        vec![
            format!("tool_version = {}", self.version),
            format!("config_sha256 = {}", self.config_sha256),
            format!("seed = {}", self.seed),
        ]
    }

    fn json_base(&self, command: &str) -> serde_json::Value {
        json!({
            "tool_version": self.version,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "command": command,
        })
    }
}

fn merge(base: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    let mut m = base.as_object().cloned().unwrap_or_default();
    if let Some(e) = extra.as_object() {
        for (k, v) in e {
            m.insert(k.clone(), v.clone());
        }
    }
    serde_json::Value::Object(m)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Fail> {
    let mut text = serde_json::to_string_pretty(value).expect("tree is serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_csv(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<(), Fail> {
    let mut text = String::new();
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Fail> {
    let d = cfg.data.as_ref().expect("config load guarantees [data]");
    if !d.path.exists() {
        return Err(data_fail(format!("missing file {}", d.path.display())));
    }
    Dataset::load_csv(&d.path, &d.subject, &d.response).map_err(data_fail)
}

fn build_context(cfg: &RunConfig, data: &Dataset) -> Result<FitContext, Fail> {
    FitContext::new(cfg.fit.clone().expect("config load guarantees [model]"), data)
        .map_err(config_fail)
}

/// Covariate the band grid sweeps: the configured one, else the first
/// covariate inside the spline argument.
fn band_axis(cfg: &RunConfig, ctx: &FitContext) -> Result<String, Fail> {
    if let Some(a) = &cfg.band.along {
        if !ctx.model.covariates.iter().any(|c| c == a) {
            return Err(config_fail(format!("band covariate '{a}' is not in the model")));
        }
        return Ok(a.clone());
    }
    spline_covariate(&ctx.model.expr)
        .ok_or_else(|| config_fail("no covariate inside f(...); set 'along' in [band]"))
}

fn axis_range(data: &Dataset, axis: &str) -> Result<(f64, f64), Fail> {
    let values = data.column_values(axis).map_err(data_fail)?;
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(data_fail(format!("column '{axis}' has no spread")));
    }
    Ok((lo, hi))
}

/// Zeros for every model covariate, then the configured overrides.
fn covariate_template(ctx: &FitContext, at: &[(String, f64)]) -> Result<Vec<f64>, Fail> {
    let mut t = vec![0.0; ctx.model.covariates.len()];
    for (name, v) in at {
        let slot = ctx
            .model
            .covariates
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| config_fail(format!("at covariate '{name}' is not in the model")))?;
        t[slot] = *v;
    }
    Ok(t)
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

const BAND_COLUMNS: [&str; 7] = ["grid", "estimate", "se", "pw_lo", "pw_hi", "sim_lo", "sim_hi"];

fn band_rows(b: &Band) -> Vec<Vec<String>> {
    (0..b.grid.len())
        .map(|i| {
            vec![
                format_sig(b.grid[i]),
                format_sig(b.estimate[i]),
                format_sig(b.se[i]),
                format_sig(b.pointwise_lo[i]),
                format_sig(b.pointwise_hi[i]),
                format_sig(b.simultaneous_lo[i]),
                format_sig(b.simultaneous_hi[i]),
            ]
        })
        .collect()
}

fn write_band(path: &Path, meta: &Meta, target: &str, band: &Band) -> Result<(), Fail> {
    let mut comments = meta.csv_comments();
    comments.push(format!("target = {target}"));
    comments.push(format!("alpha = {}", band.alpha));
    comments.push(format!("critical_value = {}", format_sig(band.critical_value)));
    write_csv(path, &comments, &BAND_COLUMNS, band_rows(band))
}

/// Band outputs shared by fit and predict: one population file plus one per
/// selected subject.
struct BandPlan {
    axis: String,
    grid: Vec<f64>,
    at: Vec<f64>,
    subjects: Vec<usize>,
}

fn subject_indices(data: &Dataset, select: &SubjectSelect) -> Result<Vec<usize>, Fail> {
    match select {
        SubjectSelect::None => Ok(Vec::new()),
        SubjectSelect::All => Ok((0..data.n_subjects()).collect()),
        SubjectSelect::Ids(ids) => ids
            .iter()
            .map(|id| {
                data.subject_index(id)
                    .ok_or_else(|| config_fail(format!("unknown subject '{id}'")))
            })
            .collect(),
    }
}

fn write_all_bands(
    cfg: &RunConfig,
    meta: &Meta,
    ctx: &FitContext,
    data: &Dataset,
    fitted: &FitResult,
    cov: &FixedCov,
    plan: &BandPlan,
) -> Result<Vec<String>, Fail> {
    let pred = prediction_cov(ctx, data, fitted, cov).map_err(estimation_fail)?;
    let mut files = Vec::new();

    let req = BandRequest {
        target: BandTarget::Population,
        grid: plan.grid.clone(),
        along: plan.axis.clone(),
        at: plan.at.clone(),
        alpha: cfg.band.alpha,
        n_sim: cfg.band.n_sim,
        seed: cfg.seed,
    };
    let band = curve_band(ctx, fitted, &pred, &req).map_err(estimation_fail)?;
    let name = "band_population.csv".to_string();
    write_band(&cfg.out.join(&name), meta, "population", &band)?;
    files.push(name);

    for &i in &plan.subjects {
        let row = data.subject_range(i).start;
        let req = BandRequest {
            target: BandTarget::Subject(i),
            grid: plan.grid.clone(),
            along: plan.axis.clone(),
            at: ctx.cov.row(row).to_vec(),
            alpha: cfg.band.alpha,
            n_sim: cfg.band.n_sim,
            seed: cfg.seed,
        };
        let band = curve_band(ctx, fitted, &pred, &req).map_err(estimation_fail)?;
        let id = data.subject_id(i);
        let name = format!("band_subject_{}.csv", safe_name(id));
        write_band(&cfg.out.join(&name), meta, &format!("subject {id}"), &band)?;
        files.push(name);
    }
    Ok(files)
}

#[derive(serde::Serialize)]
struct ParamRow {
    name: String,
    estimate: f64,
    se: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    log_scale: bool,
}

/// Reporting order: fixed effects, subject-effect sds, residual sd; spline
/// coefficients and the smoothness sd go to the auxiliary list.
fn split_rows(rows: Vec<ParamRow>) -> (Vec<ParamRow>, Vec<ParamRow>) {
    let mut betas = Vec::new();
    let mut sds = Vec::new();
    let mut sigma = Vec::new();
    let mut aux = Vec::new();
    for r in rows {
        if r.name.starts_with("beta") {
            betas.push(r);
        } else if r.name.starts_with("sd_b") {
            sds.push(r);
        } else if r.name == "sigma" {
            sigma.push(r);
        } else {
            aux.push(r);
        }
    }
    betas.extend(sds);
    betas.extend(sigma);
    (betas, aux)
}

fn rows_with_se(estimates: &[ParamEstimate]) -> (Vec<ParamRow>, Vec<ParamRow>) {
    split_rows(
        estimates
            .iter()
            .map(|e| ParamRow {
                name: e.name.clone(),
                estimate: round_sig(e.estimate),
                se: Some(round_sig(e.se)),
                lo: Some(round_sig(e.lo)),
                hi: Some(round_sig(e.hi)),
                log_scale: e.log_scale,
            })
            .collect(),
    )
}

fn rows_without_se(ctx: &FitContext, fitted: &FitResult) -> (Vec<ParamRow>, Vec<ParamRow>) {
    let rows = (0..ctx.param_layout.dim())
        .map(|i| {
            let (name, log_scale) = param_name(ctx, i);
            let est = if log_scale { fitted.theta[i].exp() } else { fitted.theta[i] };
            ParamRow {
                name,
                estimate: round_sig(est),
                se: None,
                lo: None,
                hi: None,
                log_scale,
            }
        })
        .collect();
    split_rows(rows)
}

fn cmd_fit(cfg: &RunConfig, meta: &Meta) -> Result<(), Fail> {
    let data = load_dataset(cfg)?;
    let ctx = build_context(cfg, &data)?;
    let started = Instant::now();

    let fitted = match fit(&ctx, &data) {
        Ok(f) => f,
        Err(e) => {
            let report = merge(
                meta.json_base("fit"),
                json!({
                    "converged": false,
                    "error": e.to_string(),
                    "n_obs": data.n_obs(),
                    "n_subjects": data.n_subjects(),
                    "wall_seconds": started.elapsed().as_secs_f64(),
                }),
            );
            write_json(&cfg.out.join("fit_report.json"), &report)?;
            return Err(estimation_fail(e));
        }
    };

    let mut problems = Vec::new();
    if !fitted.converged {
        problems.push(format!(
            "outer gradient norm {:.3e} missed the tolerance",
            fitted.grad_norm
        ));
    }

    let cov = fixed_cov(&ctx, &data, &fitted);
    let (main_rows, aux_rows) = match &cov {
        Ok(c) => rows_with_se(&wald_ci(&ctx, &fitted, c, cfg.band.alpha)),
        Err(e) => {
            problems.push(format!("no standard errors: {e}"));
            rows_without_se(&ctx, &fitted)
        }
    };

    let params = merge(
        meta.json_base("fit"),
        json!({
            "converged": fitted.converged,
            "nll": round_sig(fitted.nll),
            "aic": round_sig(marginal_aic(&ctx, &fitted)),
            "alpha": cfg.band.alpha,
            "parameters": serde_json::to_value(&main_rows).expect("rows serialize"),
            "auxiliary": serde_json::to_value(&aux_rows).expect("rows serialize"),
            "wall_seconds": fitted.wall_seconds,
        }),
    );
    write_json(&cfg.out.join("params.json"), &params)?;

    let mut band_files = Vec::new();
    if let Ok(c) = &cov {
        let axis = band_axis(cfg, &ctx)?;
        let (lo, hi) = axis_range(&data, &axis)?;
        let plan = BandPlan {
            grid: uniform_grid(lo, hi, cfg.band.grid_points),
            at: covariate_template(&ctx, &[])?,
            subjects: subject_indices(&data, &cfg.band.subjects)?,
            axis,
        };
        match write_all_bands(cfg, meta, &ctx, &data, &fitted, c, &plan) {
            Ok(files) => band_files = files,
            Err(f) if f.code == 4 => problems.push(f.message),
            Err(f) => return Err(f),
        }
    }

    let report = merge(
        meta.json_base("fit"),
        json!({
            "converged": fitted.converged,
            "problems": problems,
            "nll": round_sig(fitted.nll),
            "grad_norm": round_sig(fitted.grad_norm),
            "outer_iterations": fitted.outer_iterations,
            "nll_evals": fitted.nll_evals,
            "inner_iterations": fitted.inner_iterations,
            "n_obs": data.n_obs(),
            "n_subjects": data.n_subjects(),
            "band_files": band_files,
            "wall_seconds": started.elapsed().as_secs_f64(),
        }),
    );
    write_json(&cfg.out.join("fit_report.json"), &report)?;

    if problems.is_empty() {
        Ok(())
    } else {
        Err(estimation_fail(problems.join("; ")))
    }
}

fn cmd_predict(cfg: &RunConfig, meta: &Meta) -> Result<(), Fail> {
    let data = load_dataset(cfg)?;
    let ctx = build_context(cfg, &data)?;
    let started = Instant::now();

    let fitted = fit(&ctx, &data).map_err(estimation_fail)?;
    let cov = fixed_cov(&ctx, &data, &fitted).map_err(estimation_fail)?;

    let axis = band_axis(cfg, &ctx)?;
    let (lo, hi) = match cfg.predict.grid {
        Some(g) => g,
        None => axis_range(&data, &axis)?,
    };
    let points = cfg.predict.grid_points.unwrap_or(cfg.band.grid_points);
    if points < 2 {
        return Err(config_fail("predict grid needs at least 2 points"));
    }
    let plan = BandPlan {
        grid: uniform_grid(lo, hi, points),
        at: covariate_template(&ctx, &cfg.predict.at)?,
        subjects: subject_indices(&data, &cfg.predict.subjects)?,
        axis,
    };
    let band_files = write_all_bands(cfg, meta, &ctx, &data, &fitted, &cov, &plan)?;

    let report = merge(
        meta.json_base("predict"),
        json!({
            "converged": fitted.converged,
            "band_files": band_files,
            "grid": [lo, hi],
            "grid_points": points,
            "wall_seconds": started.elapsed().as_secs_f64(),
        }),
    );
    write_json(&cfg.out.join("predict_report.json"), &report)?;
    if fitted.converged {
        Ok(())
    } else {
        Err(estimation_fail("outer loop missed the gradient test"))
    }
}

fn cmd_bootstrap(cfg: &RunConfig, meta: &Meta) -> Result<(), Fail> {
    let data = load_dataset(cfg)?;
    let ctx = build_context(cfg, &data)?;
    let started = Instant::now();

    let failed_report = |stage: &str, e: &dyn std::fmt::Display| {
        merge(
            meta.json_base("bootstrap"),
            json!({
                "replicates": cfg.bootstrap_replicates,
                "error": format!("{stage}: {e}"),
                "wall_seconds": started.elapsed().as_secs_f64(),
            }),
        )
    };

    let fitted = match fit(&ctx, &data) {
        Ok(f) => f,
        Err(e) => {
            write_json(&cfg.out.join("bootstrap.json"), &failed_report("base fit", &e))?;
            return Err(estimation_fail(e));
        }
    };
    let report =
        match parametric_bootstrap(&ctx, &data, &fitted, cfg.bootstrap_replicates, cfg.seed) {
            Ok(r) => r,
            Err(e) => {
                write_json(&cfg.out.join("bootstrap.json"), &failed_report("resampling", &e))?;
                return Err(estimation_fail(e));
            }
        };

    let params: Vec<serde_json::Value> = report
        .params
        .iter()
        .map(|p| {
            let ratio = if p.mean_se > 0.0 {
                json!(round_sig(p.boot_sd / p.mean_se))
            } else {
                serde_json::Value::Null
            };
            json!({
                "name": p.name,
                "original": round_sig(p.original),
                "boot_mean": round_sig(p.boot_mean),
                "boot_sd": round_sig(p.boot_sd),
                "mean_se": round_sig(p.mean_se),
                "sd_to_se": ratio,
            })
        })
        .collect();

    let summary = merge(
        meta.json_base("bootstrap"),
        json!({
            "replicates": report.replicates,
            "failures": report.failures,
            "parameters": params,
            "wall_seconds": started.elapsed().as_secs_f64(),
        }),
    );
    write_json(&cfg.out.join("bootstrap.json"), &summary)?;

    let mut header: Vec<&str> = vec!["rep"];
    let names: Vec<String> = report.params.iter().map(|p| p.name.clone()).collect();
    header.extend(names.iter().map(|s| s.as_str()));
    let rows: Vec<Vec<String>> = report
        .estimates
        .iter()
        .enumerate()
        .map(|(r, est)| {
            let mut row = vec![r.to_string()];
            row.extend(est.iter().map(|v| format_sig(*v)));
            row
        })
        .collect();
    let mut comments = meta.csv_comments();
    comments.push("values on the estimation scale (sd and sigma columns are natural logs)".into());
    write_csv(&cfg.out.join("bootstrap_reps.csv"), &comments, &header, rows)?;
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, meta: &Meta) -> Result<(), Fail> {
    let sim = cfg.simulate.as_ref().expect("config load guarantees [simulate]");
    let scenarios = sim.scenarios().map_err(config_fail)?;

    if sim.scenario == "cubic" {
        let mut rows = Vec::new();
        let mut summaries = Vec::new();
        for sc in &scenarios {
            let runs = monotone_sweep(sc, &sim.lambda, cfg.seed, sim.slope_grid)
                .map_err(estimation_fail)?;
            for r in &runs {
                rows.push(vec![
                    csv_field(&sc.label()),
                    format_sig(r.weight),
                    format_sig(r.min_slope),
                    format_sig(r.nll),
                    r.converged.to_string(),
                ]);
            }
            summaries.push(json!({ "scenario": sc.label(), "runs": runs }));
        }
        write_csv(
            &cfg.out.join("monotone.csv"),
            &meta.csv_comments(),
            &["scenario", "weight", "min_slope", "nll", "converged"],
            rows,
        )?;
        let summary = merge(meta.json_base("simulate"), json!({ "scenarios": summaries }));
        write_json(&cfg.out.join("summary.json"), &summary)?;
        return Ok(());
    }

    let band = cfg.band.settings();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for sc in &scenarios {
        let report = run_replications(sc, sim.replications, cfg.seed, &band, cfg.workers)
            .map_err(estimation_fail)?;
        for r in &report.reps {
            rows.push(vec![
                csv_field(&report.scenario),
                r.rep.to_string(),
                r.seed.to_string(),
                r.converged.to_string(),
                csv_field(r.error.as_deref().unwrap_or("")),
                format_sig(r.nll),
                format_sig(r.grad_norm),
                r.outer_iterations.to_string(),
                r.population_covered.to_string(),
                format_sig(r.population_width),
                format_sig(r.critical_value),
                format_sig(r.subjects_covered),
                format_sig(r.subject_width),
            ]);
        }
        summaries.push(json!({
            "scenario": report.scenario,
            "replications": report.replications,
            "failures": report.failures,
            "non_converged": report.non_converged,
            "alpha": report.alpha,
            "population_coverage": round_sig(report.population_coverage),
            "population_coverage_ci": [
                round_sig(report.population_coverage_ci.0),
                round_sig(report.population_coverage_ci.1),
            ],
            "subject_coverage": round_sig(report.subject_coverage),
            "subject_coverage_ci": [
                round_sig(report.subject_coverage_ci.0),
                round_sig(report.subject_coverage_ci.1),
            ],
            "mean_population_width": round_sig(report.mean_population_width),
            "mean_subject_width": round_sig(report.mean_subject_width),
            "mean_critical_value": round_sig(report.mean_critical_value),
            "median_wall_seconds": report.median_wall_seconds,
            "param_medians": report.param_medians,
        }));
    }
    write_csv(
        &cfg.out.join("replications.csv"),
        &meta.csv_comments(),
        &[
            "scenario",
            "rep",
            "seed",
            "converged",
            "error",
            "nll",
            "grad_norm",
            "outer_iterations",
            "population_covered",
            "population_width",
            "critical_value",
            "subjects_covered",
            "subject_width",
        ],
        rows,
    )?;
    let summary = merge(meta.json_base("simulate"), json!({ "scenarios": summaries }));
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(())
}

fn cmd_benchmark(cfg: &RunConfig, meta: &Meta) -> Result<(), Fail> {
    let b = cfg.benchmark.as_ref().expect("config load guarantees [benchmark]");
    let rows = benchmark(&b.scenarios, b.replications, cfg.seed).map_err(estimation_fail)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                csv_field(&r.label),
                r.subjects.to_string(),
                r.observations.to_string(),
                r.replications.to_string(),
                r.failures.to_string(),
                format_sig(r.q1_seconds),
                format_sig(r.median_seconds),
                format_sig(r.q3_seconds),
            ]
        })
        .collect();
    write_csv(
        &cfg.out.join("benchmark.csv"),
        &meta.csv_comments(),
        &[
            "scenario",
            "subjects",
            "observations",
            "replications",
            "failures",
            "q1_seconds",
            "median_seconds",
            "q3_seconds",
        ],
        csv_rows,
    )?;
    Ok(())
}
