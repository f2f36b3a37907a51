//! End-to-end runs of the command-line binary: exit codes, file layout,
//! and byte-level determinism of the outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use snmm::model::Dataset;
use snmm::sim::Scenario;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_snmm")
}

fn run(config: &Path, extra: &[&str]) -> (i32, String) {
    let out = Command::new(bin())
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

/// Round-trips a generated dataset into the CSV layout the tool reads.
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

fn sine_fixture(dir: &Path) -> PathBuf {
    let sc = Scenario::sine(6, 8, 0.3, false);
    let (data, _) = sc.generate(41, 2).unwrap();
    let csv = dir.join("sine.csv");
    write_data_csv(&data, &csv);
    csv
}

/// Shift-only model with two random effects: enough subjects per variance
/// component for a well-conditioned information matrix.
fn bell_fixture(dir: &Path) -> PathBuf {
    let sc = Scenario::bell(8, 10, 0.45);
    let (data, _) = sc.generate(41, 2).unwrap();
    let csv = dir.join("bell.csv");
    write_data_csv(&data, &csv);
    csv
}

fn fit_config(dir: &Path, csv: &Path, extra: &str) -> PathBuf {
    let text = format!(
        "[run]\ncommand = fit\nseed = 5\nout = {}\n\n\
         [data]\npath = {}\nsubject = id\nresponse = y\n\n\
         [model]\nexpression = beta0 + b1 + f(t - b2)\n\
         knots = scaled 3.0\ninterior_knots = 7\n\n\
         [band]\nn_sim = 300\ngrid_points = 25\nsubjects = s0001,s0004\n{extra}",
        dir.join("out").display(),
        csv.display(),
    );
    let path = dir.join("fit.ini");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn fit_writes_params_bands_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = bell_fixture(dir.path());
    let config = fit_config(dir.path(), &csv, "");
    let (code, stderr) = run(&config, &[]);
    assert_eq!(code, 0, "stderr: {stderr}");

    let out = dir.path().join("out");
    let params: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("params.json")).unwrap()).unwrap();
    assert_eq!(params["command"], "fit");
    assert_eq!(params["converged"], true);
    // One intercept, two subject-effect sds, one residual sd.
    let rows = params["parameters"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["name"], "beta0");
    assert_eq!(rows[1]["name"], "sd_b1");
    assert_eq!(rows[3]["name"], "sigma");
    assert!(rows[3]["se"].as_f64().unwrap() > 0.0);
    assert!(params["aic"].as_f64().unwrap().is_finite());

    let band = fs::read_to_string(out.join("band_population.csv")).unwrap();
    let header = band.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "grid,estimate,se,pw_lo,pw_hi,sim_lo,sim_hi");
    let rows = band.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 25);
    assert!(band.lines().any(|l| l.starts_with("# config_sha256 = ")));

    assert!(out.join("band_subject_s0001.csv").exists());
    assert!(out.join("band_subject_s0004.csv").exists());
    assert!(!out.join("band_subject_s0000.csv").exists());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["problems"].as_array().unwrap().len(), 0);
    assert_eq!(report["n_subjects"], 8);
}

#[test]
fn rerun_with_same_seed_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = bell_fixture(dir.path());
    let config = fit_config(dir.path(), &csv, "");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let (code, err) = run(&config, &["--out", out_a.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run(&config, &["--out", out_b.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");

    for name in ["band_population.csv", "band_subject_s0001.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // The parameter file is identical except the timing field.
    let strip = |p: &Path| -> String {
        fs::read_to_string(p.join("params.json"))
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&out_a), strip(&out_b));
}

#[test]
fn missing_csv_exits_3_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = fit_config(dir.path(), &dir.path().join("nowhere.csv"), "");
    let (code, stderr) = run(&config, &[]);
    assert_eq!(code, 3);
    assert!(stderr.contains("nowhere.csv"), "stderr: {stderr}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown key.
    let bad = dir.path().join("bad.ini");
    fs::write(&bad, "[run]\ncommand = fit\nfrobnicate = 1\n").unwrap();
    let (code, stderr) = run(&bad, &[]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("frobnicate"));

    // Negative replicate count cannot parse as a count.
    let csv = sine_fixture(dir.path());
    let boot = dir.path().join("boot.ini");
    fs::write(
        &boot,
        format!(
            "[run]\ncommand = bootstrap\n\n[data]\npath = {}\nsubject = id\nresponse = y\n\n\
             [model]\nexpression = beta0 + b1 + f(t - b2)\n\n[bootstrap]\nreplicates = -5\n",
            csv.display()
        ),
    )
    .unwrap();
    let (code, stderr) = run(&boot, &[]);
    assert_eq!(code, 2, "stderr: {stderr}");

    // Missing config file.
    let (code, _) = run(&dir.path().join("absent.ini"), &[]);
    assert_eq!(code, 2);
}

#[test]
fn simulate_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.ini");
    fs::write(
        &config,
        "[run]\ncommand = simulate\nseed = 11\n\n[simulate]\nscenario = sine\nm = 4\nn = 8\n\
         sigma = 0.3\nreplications = 2\n\n[band]\nn_sim = 200\ngrid_points = 20\n",
    )
    .unwrap();
    let out_1 = dir.path().join("w1");
    let out_4 = dir.path().join("w4");
    let (code, err) = run(&config, &["--workers", "1", "--out", out_1.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run(&config, &["--workers", "4", "--out", out_4.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let a = fs::read(out_1.join("replications.csv")).unwrap();
    let b = fs::read(out_4.join("replications.csv")).unwrap();
    assert_eq!(a, b, "replication rows depend on the worker count");

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_1.join("summary.json")).unwrap()).unwrap();
    let sc = &summary["scenarios"][0];
    assert_eq!(sc["replications"], 2);
    assert!(sc["population_coverage"].as_f64().is_some());
}

#[test]
fn bootstrap_zero_replicates_is_an_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sine_fixture(dir.path());
    let config = dir.path().join("boot.ini");
    fs::write(
        &config,
        format!(
            "[run]\ncommand = bootstrap\nseed = 9\nout = {}\n\n\
             [data]\npath = {}\nsubject = id\nresponse = y\n\n\
             [model]\nexpression = beta0 + b1 + exp(b2) * f(t - ilogit(b3))\n\
             knots = interval -1 1\ninterior_knots = 5\n\n[bootstrap]\nreplicates = 0\n",
            dir.path().join("out").display(),
            csv.display()
        ),
    )
    .unwrap();
    let (code, stderr) = run(&config, &[]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let out = dir.path().join("out");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("bootstrap.json")).unwrap()).unwrap();
    assert_eq!(report["replicates"], 0);
    assert_eq!(report["failures"], 0);
    let reps = fs::read_to_string(out.join("bootstrap_reps.csv")).unwrap();
    let lines: Vec<&str> = reps.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 1, "header only");
    assert!(lines[0].starts_with("rep,"));
}

#[test]
fn predict_respects_grid_and_template() {
    let dir = tempfile::tempdir().unwrap();
    let csv = bell_fixture(dir.path());
    let config = dir.path().join("pred.ini");
    fs::write(
        &config,
        format!(
            "[run]\ncommand = predict\nseed = 5\nout = {}\n\n\
             [data]\npath = {}\nsubject = id\nresponse = y\n\n\
             [model]\nexpression = beta0 + b1 + f(t - b2)\n\
             knots = scaled 3.0\ninterior_knots = 7\n\n\
             [band]\nn_sim = 200\n\n\
             [predict]\ngrid_lo = -2.0\ngrid_hi = 2.0\ngrid_points = 7\n",
            dir.path().join("out").display(),
            csv.display()
        ),
    )
    .unwrap();
    let (code, stderr) = run(&config, &[]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let band = fs::read_to_string(dir.path().join("out").join("band_population.csv")).unwrap();
    let rows: Vec<&str> = band.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 7);
    let first: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    let last: f64 = rows[6].split(',').next().unwrap().parse().unwrap();
    assert!((first + 2.0).abs() < 1e-9 && (last - 2.0).abs() < 1e-9);
    assert!(!dir.path().join("out").join("params.json").exists());
}
