//! C ABI for the fitting library: load a config, fit, read parameters, and
//! evaluate confidence bands into caller-owned arrays.
//!
//! Conventions: every function is safe to call with a NULL handle (it
//! reports an argument error); fallible calls return a status code and leave
//! a message retrievable with `snmm_last_error`, which stays valid until the
//! next failing call on the same thread. Handles own all memory they hand
//! out; strings returned from accessor functions live as long as the handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use snmm::config::{Command, RunConfig};
use snmm::error::Error;
use snmm::estimate::{fit, FitContext, FitResult};
use snmm::inference::{
    curve_band, fixed_cov, marginal_aic, param_name, prediction_cov, wald_ci, BandRequest,
    BandTarget, FixedCov, ParamEstimate, PredictionCov,
};
use snmm::model::{spline_covariate, Dataset};

/// Call outcome; nonzero values match the command-line tool's exit codes,
/// plus a code for misuse of the interface itself.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SnmmStatus {
    Ok = 0,
    ConfigError = 2,
    DataError = 3,
    EstimationError = 4,
    ArgumentError = 5,
}

/// One parameter on its reporting scale. `has_se` is 0 when the observed
/// information was singular and only the point estimate is available.
#[repr(C)]
pub struct SnmmParam {
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// 1 when the reporting scale is exp of the estimation scale.
    pub log_scale: i32,
    pub has_se: i32,
}

/// Fitted model handle. Opaque; create with `snmm_fit_new`, release with
/// `snmm_fit_free`.
pub struct SnmmFit {
    ctx: FitContext,
    data: Dataset,
    result: FitResult,
    cov: Option<FixedCov>,
    cov_error: Option<String>,
    pred: Option<PredictionCov>,
    estimates: Vec<ParamEstimate>,
    names: Vec<CString>,
    subject_ids: Vec<CString>,
    alpha: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).expect("no interior nul"));
}

fn classify(e: &Error) -> SnmmStatus {
    match e {
        Error::InvalidConfig(_) | Error::SyntaxError { .. } | Error::UnknownFunction { .. } => {
            SnmmStatus::ConfigError
        }
        Error::MissingColumn(_) | Error::ParseError { .. } | Error::Io(_) => SnmmStatus::DataError,
        _ => SnmmStatus::EstimationError,
    }
}

/// Message from the most recent failing call on this thread. Empty string
/// when nothing failed yet; the pointer stays valid until the next failure.
#[no_mangle]
pub extern "C" fn snmm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn snmm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn fit_from_config(text: &str) -> Result<Box<SnmmFit>, (SnmmStatus, String)> {
    let cfg = RunConfig::parse(text).map_err(|e| (SnmmStatus::ConfigError, e.to_string()))?;
    if cfg.command != Command::Fit {
        return Err((
            SnmmStatus::ConfigError,
            format!("expected command = fit, got '{}'", cfg.command.name()),
        ));
    }
    let d = cfg.data.as_ref().expect("fit config carries [data]");
    let path = PathBuf::from(&d.path);
    if !path.exists() {
        return Err((SnmmStatus::DataError, format!("missing file {}", path.display())));
    }
    let data = Dataset::load_csv(&path, &d.subject, &d.response)
        .map_err(|e| (classify(&e).max_data(), e.to_string()))?;
    let ctx = FitContext::new(cfg.fit.clone().expect("fit config carries [model]"), &data)
        .map_err(|e| (SnmmStatus::ConfigError, e.to_string()))?;
    let result =
        fit(&ctx, &data).map_err(|e| (SnmmStatus::EstimationError, e.to_string()))?;

    let (cov, cov_error) = match fixed_cov(&ctx, &data, &result) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let pred = cov
        .as_ref()
        .and_then(|c| prediction_cov(&ctx, &data, &result, c).ok());
    let estimates = match &cov {
        Some(c) => wald_ci(&ctx, &result, c, cfg.band.alpha),
        None => point_estimates(&ctx, &result),
    };
    let names = estimates
        .iter()
        .map(|e| CString::new(e.name.as_str()).expect("names have no nul"))
        .collect();
    let subject_ids = (0..data.n_subjects())
        .map(|i| CString::new(data.subject_id(i)).unwrap_or_default())
        .collect();
    Ok(Box::new(SnmmFit {
        ctx,
        data,
        result,
        cov,
        cov_error,
        pred,
        estimates,
        names,
        subject_ids,
        alpha: cfg.band.alpha,
    }))
}

impl SnmmStatus {
    /// CSV problems always classify as data errors at this boundary.
    fn max_data(self) -> SnmmStatus {
        match self {
            SnmmStatus::Ok | SnmmStatus::ConfigError => SnmmStatus::DataError,
            other => other,
        }
    }
}

fn point_estimates(ctx: &FitContext, result: &FitResult) -> Vec<ParamEstimate> {
    (0..ctx.param_layout.dim())
        .map(|i| {
            let (name, log_scale) = param_name(ctx, i);
            let est = if log_scale { result.theta[i].exp() } else { result.theta[i] };
            ParamEstimate {
                name,
                estimate: est,
                se: f64::NAN,
                lo: f64::NAN,
                hi: f64::NAN,
                log_scale,
            }
        })
        .collect()
}

/// Parses a config (the same text format the command-line tool reads, with
/// `command = fit`), loads the data it references, and fits the model.
/// Returns NULL on failure; `status` (optional) and `snmm_last_error`
/// explain why. A fit that ran but missed the convergence test still
/// produces a handle; check `snmm_fit_converged`.
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_new(
    config_text: *const c_char,
    status: *mut SnmmStatus,
) -> *mut SnmmFit {
    let report = |s: SnmmStatus, msg: &str, status: *mut SnmmStatus| {
        set_error(msg);
        if !status.is_null() {
            *status = s;
        }
        std::ptr::null_mut()
    };
    if config_text.is_null() {
        return report(SnmmStatus::ArgumentError, "config_text is NULL", status);
    }
    let text = match CStr::from_ptr(config_text).to_str() {
        Ok(t) => t.to_owned(),
        Err(_) => {
            return report(SnmmStatus::ArgumentError, "config_text is not UTF-8", status);
        }
    };
    match catch_unwind(AssertUnwindSafe(|| fit_from_config(&text))) {
        Ok(Ok(handle)) => {
            if !status.is_null() {
                *status = SnmmStatus::Ok;
            }
            Box::into_raw(handle)
        }
        Ok(Err((s, msg))) => report(s, &msg, status),
        Err(_) => report(SnmmStatus::EstimationError, "internal panic", status),
    }
}

#[no_mangle]
pub unsafe extern "C" fn snmm_fit_free(handle: *mut SnmmFit) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn borrow<'a>(handle: *const SnmmFit) -> Option<&'a SnmmFit> {
    if handle.is_null() {
        set_error("handle is NULL");
        None
    } else {
        Some(&*handle)
    }
}

/// 1 when the outer optimizer met its gradient test, 0 otherwise; -1 on a
/// NULL handle.
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_converged(handle: *const SnmmFit) -> i32 {
    match borrow(handle) {
        Some(h) => h.result.converged as i32,
        None => -1,
    }
}

/// Negative marginal log likelihood at the estimate.
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_nll(handle: *const SnmmFit) -> f64 {
    match borrow(handle) {
        Some(h) => h.result.nll,
        None => f64::NAN,
    }
}

#[no_mangle]
pub unsafe extern "C" fn snmm_fit_aic(handle: *const SnmmFit) -> f64 {
    match borrow(handle) {
        Some(h) => marginal_aic(&h.ctx, &h.result),
        None => f64::NAN,
    }
}

/// Number of reported parameters (fixed effects, variance components, and
/// spline null-space coefficients).
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_param_count(handle: *const SnmmFit) -> usize {
    borrow(handle).map_or(0, |h| h.estimates.len())
}

#[no_mangle]
pub unsafe extern "C" fn snmm_fit_subject_count(handle: *const SnmmFit) -> usize {
    borrow(handle).map_or(0, |h| h.data.n_subjects())
}

/// Name of parameter `index`, or NULL when out of range. The pointer lives
/// as long as the handle.
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_param_name(
    handle: *const SnmmFit,
    index: usize,
) -> *const c_char {
    match borrow(handle) {
        Some(h) => match h.names.get(index) {
            Some(name) => name.as_ptr(),
            None => {
                set_error("parameter index out of range");
                std::ptr::null()
            }
        },
        None => std::ptr::null(),
    }
}

/// Subject identifier at position `index` in the data's subject order.
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_subject_id(
    handle: *const SnmmFit,
    index: usize,
) -> *const c_char {
    match borrow(handle) {
        Some(h) => match h.subject_ids.get(index) {
            Some(id) => id.as_ptr(),
            None => {
                set_error("subject index out of range");
                std::ptr::null()
            }
        },
        None => std::ptr::null(),
    }
}

/// Fills `out` with parameter `index` on its reporting scale. When the
/// observed information was singular only the estimate is meaningful and
/// `has_se` is 0 (see `snmm_last_error` for the reason).
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_param(
    handle: *const SnmmFit,
    index: usize,
    out: *mut SnmmParam,
) -> SnmmStatus {
    let Some(h) = borrow(handle) else {
        return SnmmStatus::ArgumentError;
    };
    if out.is_null() {
        set_error("out is NULL");
        return SnmmStatus::ArgumentError;
    }
    let Some(e) = h.estimates.get(index) else {
        set_error("parameter index out of range");
        return SnmmStatus::ArgumentError;
    };
    let has_se = h.cov.is_some();
    if let Some(msg) = (!has_se).then(|| h.cov_error.clone()).flatten() {
        set_error(&msg);
    }
    *out = SnmmParam {
        estimate: e.estimate,
        se: e.se,
        ci_lo: e.lo,
        ci_hi: e.hi,
        log_scale: e.log_scale as i32,
        has_se: has_se as i32,
    };
    SnmmStatus::Ok
}

/// Simultaneous and pointwise confidence bands for the fitted curve,
/// written into six caller arrays of length `grid_len`.
///
/// `subject` selects the curve: negative for the population curve, else a
/// subject index. `grid` holds values of the swept covariate (`along`, or
/// NULL for the covariate inside the spline argument). `at` gives the other
/// covariates' values in model order (NULL for all zeros; for subject
/// curves the subject's own first-row covariates). `crit_out` (optional)
/// receives the simultaneous critical value.
#[no_mangle]
pub unsafe extern "C" fn snmm_fit_band(
    handle: *const SnmmFit,
    subject: i64,
    grid: *const f64,
    grid_len: usize,
    at: *const f64,
    at_len: usize,
    along: *const c_char,
    alpha: f64,
    n_sim: usize,
    seed: u64,
    estimate_out: *mut f64,
    se_out: *mut f64,
    pw_lo_out: *mut f64,
    pw_hi_out: *mut f64,
    sim_lo_out: *mut f64,
    sim_hi_out: *mut f64,
    crit_out: *mut f64,
) -> SnmmStatus {
    let Some(h) = borrow(handle) else {
        return SnmmStatus::ArgumentError;
    };
    if grid.is_null() || grid_len == 0 {
        set_error("grid is NULL or empty");
        return SnmmStatus::ArgumentError;
    }
    for (ptr, name) in [
        (estimate_out, "estimate_out"),
        (se_out, "se_out"),
        (pw_lo_out, "pw_lo_out"),
        (pw_hi_out, "pw_hi_out"),
        (sim_lo_out, "sim_lo_out"),
        (sim_hi_out, "sim_hi_out"),
    ] {
        if ptr.is_null() {
            set_error(&format!("{name} is NULL"));
            return SnmmStatus::ArgumentError;
        }
    }
    let Some(pred) = &h.pred else {
        let msg = h
            .cov_error
            .clone()
            .unwrap_or_else(|| "prediction covariance unavailable".into());
        set_error(&msg);
        return SnmmStatus::EstimationError;
    };

    let axis = if along.is_null() {
        match spline_covariate(&h.ctx.model.expr) {
            Some(a) => a,
            None => {
                set_error("no covariate inside f(...); pass along explicitly");
                return SnmmStatus::ConfigError;
            }
        }
    } else {
        match CStr::from_ptr(along).to_str() {
            Ok(a) => a.to_owned(),
            Err(_) => {
                set_error("along is not UTF-8");
                return SnmmStatus::ArgumentError;
            }
        }
    };

    let n_cov = h.ctx.model.covariates.len();
    let template = if at.is_null() {
        if subject >= 0 {
            let i = subject as usize;
            if i >= h.data.n_subjects() {
                set_error("subject index out of range");
                return SnmmStatus::ArgumentError;
            }
            h.ctx.cov.row(h.data.subject_range(i).start).to_vec()
        } else {
            vec![0.0; n_cov]
        }
    } else {
        if at_len != n_cov {
            set_error(&format!("at has {at_len} values, model uses {n_cov}"));
            return SnmmStatus::ArgumentError;
        }
        std::slice::from_raw_parts(at, at_len).to_vec()
    };

    let target = if subject < 0 {
        BandTarget::Population
    } else {
        let i = subject as usize;
        if i >= h.data.n_subjects() {
            set_error("subject index out of range");
            return SnmmStatus::ArgumentError;
        }
        BandTarget::Subject(i)
    };
    let req = BandRequest {
        target,
        grid: std::slice::from_raw_parts(grid, grid_len).to_vec(),
        along: axis,
        at: template,
        alpha: if alpha > 0.0 && alpha < 1.0 { alpha } else { h.alpha },
        n_sim: if n_sim == 0 { 2000 } else { n_sim },
        seed,
    };
    let band = match catch_unwind(AssertUnwindSafe(|| curve_band(&h.ctx, &h.result, pred, &req)))
    {
        Ok(Ok(b)) => b,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            return classify(&e);
        }
        Err(_) => {
            set_error("internal panic");
            return SnmmStatus::EstimationError;
        }
    };

    let write = |ptr: *mut f64, values: &[f64]| {
        std::ptr::copy_nonoverlapping(values.as_ptr(), ptr, grid_len);
    };
    write(estimate_out, &band.estimate);
    write(se_out, &band.se);
    write(pw_lo_out, &band.pointwise_lo);
    write(pw_hi_out, &band.pointwise_hi);
    write(sim_lo_out, &band.simultaneous_lo);
    write(sim_hi_out, &band.simultaneous_hi);
    if !crit_out.is_null() {
        *crit_out = band.critical_value;
    }
    SnmmStatus::Ok
}
