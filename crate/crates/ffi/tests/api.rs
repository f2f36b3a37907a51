//! Drives the C interface the way a foreign caller would: through raw
//! pointers and status codes.

use std::ffi::{CStr, CString};
use std::fs;
use std::path::Path;

use snmm::model::Dataset;
use snmm::sim::Scenario;
use snmm_ffi::{
    snmm_fit_band, snmm_fit_converged, snmm_fit_free, snmm_fit_new, snmm_fit_nll,
    snmm_fit_param, snmm_fit_param_count, snmm_fit_param_name, snmm_fit_subject_count,
    snmm_fit_subject_id, snmm_last_error, snmm_version, SnmmParam, SnmmStatus,
};

fn write_data_csv(data: &Dataset, path: &Path) {
    let mut text = String::from("id,y");
    for c in data.columns() {
        text.push(',');
        text.push_str(c);
    }
    text.push('\n');
    for i in 0..data.n_subjects() {
        for o in data.subject_range(i) {
            text.push_str(data.subject_id(i));
            text.push_str(&format!(",{}", data.y()[o]));
            for v in data.cov_row(o) {
                text.push_str(&format!(",{v}"));
            }
            text.push('\n');
        }
    }
    fs::write(path, text).unwrap();
}

fn config_text(csv: &Path) -> CString {
    CString::new(format!(
        "[run]\ncommand = fit\nseed = 5\n\n\
         [data]\npath = {}\nsubject = id\nresponse = y\n\n\
         [model]\nexpression = beta0 + b1 + f(t - b2)\nknots = scaled 3.0\ninterior_knots = 7\n",
        csv.display()
    ))
    .unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(snmm_last_error()).to_string_lossy().into_owned() }
}

#[test]
fn fit_read_band_free() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bell.csv");
    let (data, _) = Scenario::bell(8, 10, 0.45).generate(41, 2).unwrap();
    write_data_csv(&data, &csv);

    unsafe {
        let version = CStr::from_ptr(snmm_version()).to_str().unwrap();
        assert!(!version.is_empty());

        let mut status = SnmmStatus::ArgumentError;
        let handle = snmm_fit_new(config_text(&csv).as_ptr(), &mut status);
        assert!(!handle.is_null(), "fit failed: {}", last_error());
        assert!(matches!(status, SnmmStatus::Ok));
        assert_eq!(snmm_fit_converged(handle), 1);
        assert!(snmm_fit_nll(handle).is_finite());
        assert_eq!(snmm_fit_subject_count(handle), 8);

        let id0 = CStr::from_ptr(snmm_fit_subject_id(handle, 0)).to_str().unwrap();
        assert_eq!(id0, "s0000");

        // beta0, sigma, sd_b1, sd_b2, sigma_omega, plus spline coefficients.
        let n = snmm_fit_param_count(handle);
        assert!(n >= 5, "{n}");
        let mut seen_sigma = false;
        for i in 0..n {
            let name = CStr::from_ptr(snmm_fit_param_name(handle, i)).to_str().unwrap();
            let mut p = SnmmParam {
                estimate: 0.0,
                se: 0.0,
                ci_lo: 0.0,
                ci_hi: 0.0,
                log_scale: 0,
                has_se: 0,
            };
            assert!(matches!(snmm_fit_param(handle, i, &mut p), SnmmStatus::Ok));
            assert_eq!(p.has_se, 1);
            assert!(p.se > 0.0, "{name} se = {}", p.se);
            if name == "sigma" {
                seen_sigma = true;
                assert_eq!(p.log_scale, 1);
                assert!(p.estimate > 0.2 && p.estimate < 1.0, "sigma = {}", p.estimate);
                assert!(p.ci_lo < p.estimate && p.estimate < p.ci_hi);
            }
        }
        assert!(seen_sigma);

        let grid: Vec<f64> = (0..21).map(|i| -3.0 + 6.0 * i as f64 / 20.0).collect();
        let mut est = vec![0.0; grid.len()];
        let mut se = vec![0.0; grid.len()];
        let mut pw_lo = vec![0.0; grid.len()];
        let mut pw_hi = vec![0.0; grid.len()];
        let mut sim_lo = vec![0.0; grid.len()];
        let mut sim_hi = vec![0.0; grid.len()];
        let mut crit = 0.0;
        let s = snmm_fit_band(
            handle,
            -1,
            grid.as_ptr(),
            grid.len(),
            std::ptr::null(),
            0,
            std::ptr::null(),
            0.05,
            300,
            5,
            est.as_mut_ptr(),
            se.as_mut_ptr(),
            pw_lo.as_mut_ptr(),
            pw_hi.as_mut_ptr(),
            sim_lo.as_mut_ptr(),
            sim_hi.as_mut_ptr(),
            &mut crit,
        );
        assert!(matches!(s, SnmmStatus::Ok), "{}", last_error());
        assert!(crit >= 1.959);
        for g in 0..grid.len() {
            assert!(sim_lo[g] <= pw_lo[g] && pw_hi[g] <= sim_hi[g]);
            assert!(pw_lo[g] <= est[g] && est[g] <= pw_hi[g]);
        }

        // Subject band differs from the population band.
        let mut est_s = vec![0.0; grid.len()];
        let s = snmm_fit_band(
            handle,
            2,
            grid.as_ptr(),
            grid.len(),
            std::ptr::null(),
            0,
            std::ptr::null(),
            0.05,
            300,
            5,
            est_s.as_mut_ptr(),
            se.as_mut_ptr(),
            pw_lo.as_mut_ptr(),
            pw_hi.as_mut_ptr(),
            sim_lo.as_mut_ptr(),
            sim_hi.as_mut_ptr(),
            std::ptr::null_mut(),
        );
        assert!(matches!(s, SnmmStatus::Ok), "{}", last_error());
        let diff: f64 = est.iter().zip(&est_s).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-6);

        snmm_fit_free(handle);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        // NULL config.
        let mut status = SnmmStatus::Ok;
        let h = snmm_fit_new(std::ptr::null(), &mut status);
        assert!(h.is_null());
        assert!(matches!(status, SnmmStatus::ArgumentError));

        // Config syntax trouble.
        let bad = CString::new("[run]\ncommand = fit\nnope\n").unwrap();
        let h = snmm_fit_new(bad.as_ptr(), &mut status);
        assert!(h.is_null());
        assert!(matches!(status, SnmmStatus::ConfigError));
        assert!(last_error().contains("line 3"), "{}", last_error());

        // Missing data file.
        let gone = CString::new(
            "[run]\ncommand = fit\n\n[data]\npath = /no/such/file.csv\nsubject = id\nresponse = y\n\n\
             [model]\nexpression = beta0 + b1 + f(t - b2)\n",
        )
        .unwrap();
        let h = snmm_fit_new(gone.as_ptr(), &mut status);
        assert!(h.is_null());
        assert!(matches!(status, SnmmStatus::DataError));
        assert!(last_error().contains("/no/such/file.csv"));

        // Wrong command.
        let sim = CString::new(
            "[run]\ncommand = simulate\n\n[simulate]\nscenario = sine\nm = 4\nn = 4\nsigma = 0.3\n",
        )
        .unwrap();
        let h = snmm_fit_new(sim.as_ptr(), &mut status);
        assert!(h.is_null());
        assert!(matches!(status, SnmmStatus::ConfigError));

        // NULL-handle accessors degrade without crashing.
        assert_eq!(snmm_fit_converged(std::ptr::null()), -1);
        assert_eq!(snmm_fit_param_count(std::ptr::null()), 0);
        assert!(snmm_fit_param_name(std::ptr::null(), 0).is_null());
        snmm_fit_free(std::ptr::null_mut());
    }
}

#[test]
fn band_argument_checks() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bell.csv");
    let (data, _) = Scenario::bell(6, 8, 0.45).generate(41, 2).unwrap();
    write_data_csv(&data, &csv);

    unsafe {
        let handle = snmm_fit_new(config_text(&csv).as_ptr(), std::ptr::null_mut());
        assert!(!handle.is_null(), "{}", last_error());

        let grid = [0.0_f64, 1.0];
        let mut buf = [0.0_f64; 2];
        // NULL output array.
        let s = snmm_fit_band(
            handle,
            -1,
            grid.as_ptr(),
            2,
            std::ptr::null(),
            0,
            std::ptr::null(),
            0.05,
            50,
            1,
            std::ptr::null_mut(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            std::ptr::null_mut(),
        );
        assert!(matches!(s, SnmmStatus::ArgumentError));

        // Subject out of range.
        let s = snmm_fit_band(
            handle,
            99,
            grid.as_ptr(),
            2,
            std::ptr::null(),
            0,
            std::ptr::null(),
            0.05,
            50,
            1,
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            std::ptr::null_mut(),
        );
        assert!(matches!(s, SnmmStatus::ArgumentError));
        assert!(last_error().contains("subject index"));

        // Covariate template of the wrong length.
        let at = [0.0_f64; 3];
        let s = snmm_fit_band(
            handle,
            -1,
            grid.as_ptr(),
            2,
            at.as_ptr(),
            3,
            std::ptr::null(),
            0.05,
            50,
            1,
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            buf.as_mut_ptr(),
            std::ptr::null_mut(),
        );
        assert!(matches!(s, SnmmStatus::ArgumentError));

        snmm_fit_free(handle);
    }
}
