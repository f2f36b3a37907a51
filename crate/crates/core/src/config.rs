//! Run configuration: a flat `[section] key = value` text format shared by
//! the command-line tool and the C bindings.
//!
//! The format is deliberately minimal: section headers in brackets, one
//! `key = value` pair per line, full-line comments starting with `#` or `;`.
//! Unknown sections, unknown keys, and duplicate keys are errors so typos
//! surface instead of silently falling back to defaults. Every load error
//! carries the offending line number.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{FitConfig, KnotStrategy, MonotoneConfig};
use crate::model::{effect_counts, parse_model};
use crate::sim::{BandSettings, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Fit,
    Simulate,
    Bootstrap,
    Predict,
    Benchmark,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Bootstrap => "bootstrap",
            Command::Predict => "predict",
            Command::Benchmark => "benchmark",
        }
    }
}

/// Where the observations come from and which columns hold the grouping
/// and the response; every other referenced column is a covariate.
#[derive(Clone, Debug)]
pub struct DataConfig {
    pub path: PathBuf,
    pub subject: String,
    pub response: String,
}

/// Which subjects get their own band file.
#[derive(Clone, Debug, PartialEq)]
pub enum SubjectSelect {
    All,
    None,
    Ids(Vec<String>),
}

#[derive(Clone, Debug)]
pub struct BandConfig {
    pub alpha: f64,
    pub n_sim: usize,
    pub grid_points: usize,
    pub subjects: SubjectSelect,
    /// Covariate swept by the band grid; defaults to the first covariate
    /// inside the spline argument.
    pub along: Option<String>,
}

impl BandConfig {
    pub fn settings(&self) -> BandSettings {
        BandSettings { alpha: self.alpha, n_sim: self.n_sim, grid_points: self.grid_points }
    }
}

/// Scenario grid for the simulate command. Lists expand to their cross
/// product with sigma slowest, then m, then n, then the variance flag, so a
/// two-by-two-by-two grid lists all low-noise settings before the high-noise
/// ones.
#[derive(Clone, Debug)]
pub struct SimulateConfig {
    pub scenario: String,
    pub replications: usize,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub sigma: Vec<f64>,
    pub d_high: Vec<bool>,
    /// Monotonicity weights swept by the cubic scenario.
    pub lambda: Vec<f64>,
    /// Grid resolution of the fitted-slope scan in the cubic scenario.
    pub slope_grid: usize,
}

impl SimulateConfig {
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        match self.scenario.as_str() {
            "sine" => {
                for &s in &self.sigma {
                    for &m in &self.m {
                        for &n in &self.n {
                            for &high in &self.d_high {
                                out.push(Scenario::sine(m, n, s, high));
                            }
                        }
                    }
                }
            }
            "bell" => {
                for &s in &self.sigma {
                    for &m in &self.m {
                        for &n in &self.n {
                            out.push(Scenario::bell(m, n, s));
                        }
                    }
                }
            }
            "cubic" => {
                for &s in &self.sigma {
                    for &m in &self.m {
                        for &n in &self.n {
                            out.push(Scenario::cubic(m, n, s));
                        }
                    }
                }
            }
            "smocc" => {
                for &m in &self.m {
                    out.push(Scenario::smocc(m));
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!("unknown scenario '{other}'")));
            }
        }
        for sc in &out {
            sc.validate()?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct PredictConfig {
    /// Curve-argument range of the output grid; defaults to the range seen
    /// in the data at zero effects.
    pub grid: Option<(f64, f64)>,
    pub grid_points: Option<usize>,
    /// Fixed values for covariates other than the swept one.
    pub at: Vec<(String, f64)>,
    pub subjects: SubjectSelect,
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub replications: usize,
    pub scenarios: Vec<Scenario>,
}

/// Everything a single tool invocation needs. `workers` and `out` steer
/// execution and file placement only; they never influence numbers, so the
/// fingerprint excludes them.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub data: Option<DataConfig>,
    pub fit: Option<FitConfig>,
    pub band: BandConfig,
    pub simulate: Option<SimulateConfig>,
    pub bootstrap_replicates: usize,
    pub predict: PredictConfig,
    pub benchmark: Option<BenchmarkConfig>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;

        let mut run = raw.section("run");
        let command = match run.require("command")?.as_str() {
            "fit" => Command::Fit,
            "simulate" => Command::Simulate,
            "bootstrap" => Command::Bootstrap,
            "predict" => Command::Predict,
            "benchmark" => Command::Benchmark,
            other => {
                return Err(Error::InvalidConfig(format!("unknown command '{other}'")));
            }
        };
        let seed: u64 = run.parse_or("seed", 1)?;
        let workers: usize = run.parse_or("workers", 1)?;
        if workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        let out = PathBuf::from(run.take("out").unwrap_or_else(|| "out".into()));
        run.finish()?;

        let allowed: &[&str] = match command {
            Command::Fit => &["run", "data", "model", "fit", "band"],
            Command::Predict => &["run", "data", "model", "fit", "band", "predict"],
            Command::Bootstrap => &["run", "data", "model", "fit", "bootstrap"],
            Command::Simulate => &["run", "simulate", "band"],
            Command::Benchmark => &["run", "benchmark"],
        };
        raw.restrict(command.name(), allowed)?;

        let data = if raw.has("data") {
            let mut sec = raw.section("data");
            let d = DataConfig {
                path: PathBuf::from(sec.require("path")?),
                subject: sec.require("subject")?,
                response: sec.require("response")?,
            };
            sec.finish()?;
            Some(d)
        } else {
            None
        };

        let fit = if raw.has("model") || raw.has("fit") {
            Some(build_fit_config(raw.section("model"), raw.section("fit"))?)
        } else {
            None
        };

        let mut band_sec = raw.section("band");
        let band = BandConfig {
            alpha: band_sec.parse_or("alpha", 0.05)?,
            n_sim: band_sec.parse_or("n_sim", 2000)?,
            grid_points: band_sec.parse_or("grid_points", 100)?,
            subjects: parse_subjects(band_sec.take("subjects"), SubjectSelect::All)?,
            along: band_sec.take("along"),
        };
        band_sec.finish()?;
        if !(band.alpha > 0.0 && band.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} outside (0, 1)", band.alpha)));
        }
        if band.n_sim == 0 {
            return Err(Error::InvalidConfig("n_sim must be at least 1".into()));
        }
        if band.grid_points < 2 {
            return Err(Error::InvalidConfig("grid_points must be at least 2".into()));
        }

        let simulate = if raw.has("simulate") {
            let mut sec = raw.section("simulate");
            let scenario = sec.require("scenario")?;
            let sigma_list: Option<Vec<f64>> = sec.parse_list("sigma")?;
            let sigma2_list: Option<Vec<f64>> = sec.parse_list("sigma2")?;
            let sigma = match (sigma_list, sigma2_list) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidConfig(
                        "give sigma or sigma2, not both".into(),
                    ));
                }
                (Some(s), None) => s,
                (None, Some(v)) => {
                    for &x in &v {
                        if !(x > 0.0) {
                            return Err(Error::InvalidConfig(format!(
                                "sigma2 entries must be positive, got {x}"
                            )));
                        }
                    }
                    v.into_iter().map(f64::sqrt).collect()
                }
                (None, None) => default_sigma(&scenario)?,
            };
            let cfg = SimulateConfig {
                replications: sec.parse_or("replications", 100)?,
                m: sec.parse_list("m")?.unwrap_or_else(|| default_m(&scenario)),
                n: sec.parse_list("n")?.unwrap_or_else(|| default_n(&scenario)),
                sigma,
                d_high: parse_d_flags(sec.take("d"))?,
                lambda: sec
                    .parse_list("lambda")?
                    .unwrap_or_else(|| vec![0.0, 1.0, 5.0, 1000.0]),
                slope_grid: sec.parse_or("slope_grid", 400)?,
                scenario,
            };
            if cfg.replications == 0 {
                return Err(Error::InvalidConfig("replications must be at least 1".into()));
            }
            cfg.scenarios()?;
            sec.finish()?;
            Some(cfg)
        } else {
            None
        };

        let mut boot_sec = raw.section("bootstrap");
        let bootstrap_replicates: usize = boot_sec.parse_or("replicates", 0)?;
        boot_sec.finish()?;

        let mut pred_sec = raw.section("predict");
        let grid_lo: Option<f64> = pred_sec.parse_opt("grid_lo")?;
        let grid_hi: Option<f64> = pred_sec.parse_opt("grid_hi")?;
        let grid = match (grid_lo, grid_hi) {
            (Some(lo), Some(hi)) => {
                if !(hi > lo) {
                    return Err(Error::InvalidConfig(format!(
                        "predict grid [{lo}, {hi}] is empty"
                    )));
                }
                Some((lo, hi))
            }
            (None, None) => None,
            _ => {
                return Err(Error::InvalidConfig(
                    "grid_lo and grid_hi must be given together".into(),
                ));
            }
        };
        let predict = PredictConfig {
            grid,
            grid_points: pred_sec.parse_opt("grid_points")?,
            at: parse_at(pred_sec.take("at"))?,
            subjects: parse_subjects(pred_sec.take("subjects"), SubjectSelect::None)?,
        };
        pred_sec.finish()?;

        let benchmark = if raw.has("benchmark") {
            let mut sec = raw.section("benchmark");
            let b = BenchmarkConfig {
                replications: sec.parse_or("replications", 3)?,
                scenarios: parse_bench_scenarios(&sec.require("scenarios")?)?,
            };
            sec.finish()?;
            if b.replications == 0 {
                return Err(Error::InvalidConfig("replications must be at least 1".into()));
            }
            Some(b)
        } else {
            None
        };

        raw.finish()?;

        let cfg = RunConfig {
            command,
            seed,
            workers,
            out,
            data,
            fit,
            band,
            simulate,
            bootstrap_replicates,
            predict,
            benchmark,
        };
        cfg.check_sections()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Sections each command cannot run without.
    fn check_sections(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "command '{}' needs a [{what}] section",
                    self.command.name()
                )))
            }
        };
        match self.command {
            Command::Fit | Command::Predict => {
                need(self.data.is_some(), "data")?;
                need(self.fit.is_some(), "model")
            }
            Command::Bootstrap => {
                need(self.data.is_some(), "data")?;
                need(self.fit.is_some(), "model")
            }
            Command::Simulate => need(self.simulate.is_some(), "simulate"),
            Command::Benchmark => need(self.benchmark.is_some(), "benchmark"),
        }
    }

    /// Hex digest identifying the semantic configuration. Execution knobs
    /// (workers, output directory) and the seed are excluded: runs that can
    /// only differ in scheduling or file placement share a fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command.name());
        if let Some(d) = &self.data {
            let _ = writeln!(s, "data.path={}", d.path.display());
            let _ = writeln!(s, "data.subject={}", d.subject);
            let _ = writeln!(s, "data.response={}", d.response);
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(s, "model.expression={}", f.model);
            let _ = writeln!(s, "model.degree={}", f.degree);
            let _ = writeln!(s, "model.interior_knots={}", f.interior_knots);
            match f.knots {
                KnotStrategy::Interval { lo, hi } => {
                    let _ = writeln!(s, "model.knots=interval {lo} {hi}");
                }
                KnotStrategy::Scaled { c } => {
                    let _ = writeln!(s, "model.knots=scaled {c}");
                }
            }
            let _ = writeln!(s, "model.penalty_order={}", f.penalty_order);
            let _ = writeln!(s, "model.sum_to_zero={}", f.sum_to_zero);
            let _ = writeln!(s, "model.extrapolate={}", f.extrapolate);
            if let Some(m) = &f.monotone {
                let _ = writeln!(
                    s,
                    "model.monotone={} {} {}",
                    m.weight, m.grid_points, m.epsilon
                );
            }
            let _ = writeln!(
                s,
                "fit.tolerances={} {} {} {} {} {}",
                f.inner_grad_tol,
                f.inner_max_iter,
                f.outer_grad_tol,
                f.outer_rel_tol,
                f.outer_max_iter,
                f.fd_step
            );
        }
        let _ = writeln!(
            s,
            "band={} {} {} {} {}",
            self.band.alpha,
            self.band.n_sim,
            self.band.grid_points,
            subjects_text(&self.band.subjects),
            self.band.along.as_deref().unwrap_or("-")
        );
        if let Some(sim) = &self.simulate {
            let _ = writeln!(s, "simulate.scenario={}", sim.scenario);
            let _ = writeln!(s, "simulate.replications={}", sim.replications);
            let _ = writeln!(s, "simulate.m={:?}", sim.m);
            let _ = writeln!(s, "simulate.n={:?}", sim.n);
            let _ = writeln!(s, "simulate.sigma={:?}", sim.sigma);
            let _ = writeln!(s, "simulate.d={:?}", sim.d_high);
            let _ = writeln!(s, "simulate.lambda={:?}", sim.lambda);
            let _ = writeln!(s, "simulate.slope_grid={}", sim.slope_grid);
        }
        let _ = writeln!(s, "bootstrap.replicates={}", self.bootstrap_replicates);
        if let Some(g) = self.predict.grid {
            let _ = writeln!(s, "predict.grid={} {}", g.0, g.1);
        }
        if let Some(gp) = self.predict.grid_points {
            let _ = writeln!(s, "predict.grid_points={gp}");
        }
        for (name, v) in &self.predict.at {
            let _ = writeln!(s, "predict.at.{name}={v}");
        }
        let _ = writeln!(s, "predict.subjects={}", subjects_text(&self.predict.subjects));
        if let Some(b) = &self.benchmark {
            let _ = writeln!(s, "benchmark.replications={}", b.replications);
            for sc in &b.scenarios {
                let _ = writeln!(s, "benchmark.scenario={}", sc.label());
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(s.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }
}

fn subjects_text(s: &SubjectSelect) -> String {
    match s {
        SubjectSelect::All => "all".into(),
        SubjectSelect::None => "none".into(),
        SubjectSelect::Ids(ids) => ids.join(","),
    }
}

fn default_sigma(scenario: &str) -> Result<Vec<f64>> {
    match scenario {
        "cubic" => Ok(vec![0.3]),
        "smocc" => Ok(vec![f64::NAN]),
        _ => Err(Error::InvalidConfig(format!(
            "scenario '{scenario}' needs sigma or sigma2"
        ))),
    }
}

fn default_m(scenario: &str) -> Vec<usize> {
    match scenario {
        "smocc" => vec![50],
        "cubic" => vec![1],
        _ => vec![10],
    }
}

fn default_n(scenario: &str) -> Vec<usize> {
    match scenario {
        "cubic" => vec![200],
        _ => vec![10],
    }
}

fn parse_subjects(value: Option<String>, default: SubjectSelect) -> Result<SubjectSelect> {
    match value.as_deref() {
        None => Ok(default),
        Some("all") => Ok(SubjectSelect::All),
        Some("none") => Ok(SubjectSelect::None),
        Some(list) => {
            let ids: Vec<String> =
                list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
            if ids.is_empty() {
                return Err(Error::InvalidConfig("empty subject list".into()));
            }
            Ok(SubjectSelect::Ids(ids))
        }
    }
}

fn parse_d_flags(value: Option<String>) -> Result<Vec<bool>> {
    let Some(text) = value else {
        return Ok(vec![false]);
    };
    let mut out = Vec::new();
    for tok in text.split(',') {
        match tok.trim() {
            "high" => out.push(true),
            "low" => out.push(false),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "d entries must be high or low, got '{other}'"
                )));
            }
        }
    }
    Ok(out)
}

fn parse_at(value: Option<String>) -> Result<Vec<(String, f64)>> {
    let Some(text) = value else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for entry in text.split(',') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let Some((name, v)) = entry.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "at entries look like name=value, got '{entry}'"
            )));
        };
        let v: f64 = v.trim().parse().map_err(|_| {
            Error::InvalidConfig(format!("bad number '{}' in at entry", v.trim()))
        })?;
        out.push((name.trim().to_string(), v));
    }
    Ok(out)
}

/// Entries separated by semicolons: `sine M N SIGMA [high|low]`,
/// `bell M N SIGMA`, `cubic M N SIGMA`, or `smocc M`.
fn parse_bench_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for entry in text.split(';') {
        let toks: Vec<&str> = entry.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::InvalidConfig(format!("scenario '{}': {msg}", entry.trim()));
        let num = |i: usize| -> Result<usize> {
            toks.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("expected a count"))
        };
        let sig = |i: usize| -> Result<f64> {
            toks.get(i)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad("expected sigma"))
        };
        let sc = match toks[0] {
            "sine" => {
                let high = match toks.get(4) {
                    None | Some(&"low") => false,
                    Some(&"high") => true,
                    Some(other) => return Err(bad(&format!("unknown flag '{other}'"))),
                };
                Scenario::sine(num(1)?, num(2)?, sig(3)?, high)
            }
            "bell" => Scenario::bell(num(1)?, num(2)?, sig(3)?),
            "cubic" => Scenario::cubic(num(1)?, num(2)?, sig(3)?),
            "smocc" => Scenario::smocc(num(1)?),
            other => return Err(bad(&format!("unknown kind '{other}'"))),
        };
        sc.validate()?;
        out.push(sc);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("benchmark scenario list is empty".into()));
    }
    Ok(out)
}

fn build_fit_config(mut model: SectionReader, mut fit: SectionReader) -> Result<FitConfig> {
    let expression = model.require("expression")?;
    let expr = parse_model(&expression)?;
    let (p, q) = effect_counts(&expr);

    let knots = match model.take("knots") {
        None => KnotStrategy::Scaled { c: 3.0 },
        Some(text) => {
            let toks: Vec<&str> = text.split_whitespace().collect();
            match toks.as_slice() {
                ["scaled", c] => KnotStrategy::Scaled {
                    c: c.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad knot scale '{c}'"))
                    })?,
                },
                ["interval", lo, hi] => {
                    let lo: f64 = lo.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad knot bound '{lo}'"))
                    })?;
                    let hi: f64 = hi.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad knot bound '{hi}'"))
                    })?;
                    KnotStrategy::Interval { lo, hi }
                }
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "knots must be 'scaled C' or 'interval LO HI', got '{text}'"
                    )));
                }
            }
        }
    };

    let weight: f64 = model.parse_or("monotone_weight", 0.0)?;
    let grid_points: usize = model.parse_or("monotone_grid", 200)?;
    let epsilon: f64 = model.parse_or("monotone_epsilon", 1e-6)?;
    if weight < 0.0 {
        return Err(Error::InvalidConfig("monotone_weight must not be negative".into()));
    }
    let monotone = if weight > 0.0 {
        Some(MonotoneConfig { weight, grid_points, epsilon })
    } else {
        None
    };

    let base = FitConfig::default();
    let cfg = FitConfig {
        model: expression,
        p,
        q,
        degree: model.parse_or("degree", base.degree)?,
        interior_knots: model.parse_or("interior_knots", base.interior_knots)?,
        knots,
        penalty_order: model.parse_or("penalty_order", base.penalty_order)?,
        sum_to_zero: model.parse_or("sum_to_zero", base.sum_to_zero)?,
        extrapolate: model.parse_or("extrapolate", base.extrapolate)?,
        monotone,
        inner_grad_tol: fit.parse_or("inner_grad_tol", base.inner_grad_tol)?,
        inner_max_iter: fit.parse_or("inner_max_iter", base.inner_max_iter)?,
        outer_grad_tol: fit.parse_or("outer_grad_tol", base.outer_grad_tol)?,
        outer_rel_tol: fit.parse_or("outer_rel_tol", base.outer_rel_tol)?,
        outer_max_iter: fit.parse_or("outer_max_iter", base.outer_max_iter)?,
        fd_step: fit.parse_or("fd_step", base.fd_step)?,
    };
    model.finish()?;
    fit.finish()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Raw parse: sections of key/value pairs with source line numbers.
struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, (String, usize)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(Error::InvalidConfig(format!(
                        "line {line_no}: unterminated section header"
                    )));
                };
                let name = name.trim().to_string();
                if name.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "line {line_no}: empty section name"
                    )));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {line_no}: expected 'key = value' or '[section]'"
                )));
            };
            let Some(section) = &current else {
                return Err(Error::InvalidConfig(format!(
                    "line {line_no}: key before any [section]"
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::InvalidConfig(format!("line {line_no}: empty key")));
            }
            let entry = sections.get_mut(section).expect("section exists");
            if let Some((_, first)) = entry.get(&key) {
                return Err(Error::InvalidConfig(format!(
                    "line {line_no}: duplicate key '{key}' in [{section}] (first at line {first})"
                )));
            }
            entry.insert(key, (value, line_no));
        }
        Ok(RawConfig { sections })
    }

    fn has(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    /// Removes and wraps a section; absent sections read as empty, so every
    /// key falls back to its default.
    fn section(&mut self, name: &str) -> SectionReader {
        SectionReader {
            name: name.to_string(),
            map: self.sections.remove(name).unwrap_or_default(),
        }
    }

    fn restrict(&self, command: &str, allowed: &[&str]) -> Result<()> {
        for name in self.sections.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "section [{name}] is not used by command '{command}'"
                )));
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(name) = self.sections.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown section [{name}]")));
        }
        Ok(())
    }
}

struct SectionReader {
    name: String,
    map: BTreeMap<String, (String, usize)>,
}

impl SectionReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key).map(|(v, _)| v)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| {
            Error::InvalidConfig(format!("[{}] is missing '{key}'", self.name))
        })
    }

    fn parse_opt<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("line {line}: bad value '{v}' for '{key}'"))
            }),
        }
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Comma-separated list of values of one type.
    fn parse_list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((v, line)) => {
                let mut out = Vec::new();
                for tok in v.split(',') {
                    let tok = tok.trim();
                    if tok.is_empty() {
                        continue;
                    }
                    out.push(tok.parse().map_err(|_| {
                        Error::InvalidConfig(format!(
                            "line {line}: bad value '{tok}' in list '{key}'"
                        ))
                    })?);
                }
                if out.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "line {line}: empty list for '{key}'"
                    )));
                }
                Ok(Some(out))
            }
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (_, line))) = self.map.iter().next() {
            return Err(Error::InvalidConfig(format!(
                "line {line}: unknown key '{key}' in [{}]",
                self.name
            )));
        }
        Ok(())
    }
}
