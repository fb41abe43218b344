use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use eps_cli::{emit_csv, run_experiment, CheckStatus, ExperimentConfig, CSV_HEADER};
use eps_core::{Complex64, GaugeTag, ObservableRecord};
use serde_json::Value;

fn small_config(dir: &Path, overrides: &[&str]) -> ExperimentConfig {
    let mut all = vec![
        "grid.n_q=64",
        "grid.n_p=64",
        "propagator.dt=0.005",
        "propagator.record_every=4",
    ];
    all.extend_from_slice(overrides);
    let all: Vec<String> = all.into_iter().map(String::from).collect();
    let mut cfg = ExperimentConfig::from_toml_str("", &all).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

/// Report JSON without the fields that legitimately vary between runs.
fn stable_report(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("timing");
    obj["config"].as_object_mut().unwrap().remove("output_dir");
    v
}

fn record(t: f64, norm: f64) -> ObservableRecord {
    ObservableRecord {
        t,
        mean_p: Complex64::new(0.1 * t, -1e-300),
        mean_qdot: Complex64::new(1.0 / 3.0, f64::MIN_POSITIVE),
        norm: Complex64::new(norm, 0.0),
        sigma_instant: Complex64::new(f64::NAN, 2.0f64.sqrt()),
        mean_q: None,
    }
}

#[test]
fn csv_single_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    emit_csv(&[record(0.0, 1.0)], &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.ends_with('\n'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER.join(","));
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[5], "1.0");
}

#[test]
fn csv_parses_back_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.csv");
    let records: Vec<_> = (0..10).map(|k| record(k as f64 * 0.1, 1.0 + k as f64 * 1e-16)).collect();
    emit_csv(&records, &path).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 11);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    for (row, r) in reader.records().zip(&records) {
        let vals: Vec<f64> = row.unwrap().iter().map(|s| s.parse().unwrap()).collect();
        let expect = [
            r.t,
            r.mean_p.re,
            r.mean_p.im,
            r.mean_qdot.re,
            r.mean_qdot.im,
            r.norm.re,
            r.norm.im,
            r.sigma_instant.re,
            r.sigma_instant.im,
        ];
        for (got, want) in vals.iter().zip(expect) {
            assert!(got.to_bits() == want.to_bits() || (got.is_nan() && want.is_nan()), "{got} vs {want}");
        }
    }
}

#[test]
fn csv_rejects_empty_and_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_csv(&[], &dir.path().join("x.csv")).is_err());
    let missing = dir.path().join("no/such/dir/x.csv");
    let err = emit_csv(&[record(0.0, 1.0)], &missing).unwrap_err();
    assert!(err.to_string().contains("no/such/dir"), "{err}");
}

#[test]
fn zero_duration_reports_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["propagator.t_final=0"]);
    let report = run_experiment(&cfg).unwrap();
    assert!(report.passed());
    assert!((report.initial.norm - 1.0).norm() < 1e-10);
    for g in &report.gauges {
        assert_eq!(g.steps, 0);
        assert_eq!(g.records, 1);
        assert!(g.conductivity.is_none());
    }
    let csv = fs::read_to_string(dir.path().join("a_gauge.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn runs_are_deterministic() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let overrides = ["propagator.t_final=2", "seed=42"];
    run_experiment(&small_config(d1.path(), &overrides)).unwrap();
    run_experiment(&small_config(d2.path(), &overrides)).unwrap();
    for name in ["a_gauge.csv", "phi_gauge.csv"] {
        assert_eq!(fs::read(d1.path().join(name)).unwrap(), fs::read(d2.path().join(name)).unwrap());
    }
    assert_eq!(
        stable_report(&d1.path().join("report.json")),
        stable_report(&d2.path().join("report.json"))
    );
}

#[test]
fn gauge_selection_shapes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["propagator.t_final=1", "gauges=[\"phi_gauge\"]"]);
    run_experiment(&cfg).unwrap();
    let v = stable_report(&dir.path().join("report.json"));
    assert_eq!(v["gauges"].as_array().unwrap().len(), 1);
    assert!(v.get("cross_gauge").is_none());
    assert!(!dir.path().join("a_gauge.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), &["propagator.t_final=10"]);
    let report = run_experiment(&cfg).unwrap();
    let v = stable_report(&dir.path().join("report.json"));
    assert_eq!(v["schema_version"], 1);
    let delta = v["cross_gauge"]["delta_sigma_rel"].as_f64().unwrap();
    assert!(delta <= 1e-6, "{delta}");
    let a = report.gauge(GaugeTag::AGauge).unwrap().conductivity.unwrap();
    assert!(a.relative_error <= 1e-3, "{a:?}");
}

fn eps() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eps"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "[grid]\nn_q = 64\nn_p = 64\n[propagator]\ndt = 0.005\nrecord_every = 4\n";

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("zero");
    let status = eps()
        .args(["run", cfg.to_str().unwrap(), "--quiet", "--override", "propagator.t_final=0", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("report.json").exists());

    // the windowed transient at (alpha, omega) = (2, 0.5) exceeds the 1e-3 tolerance
    let out = dir.path().join("fail");
    let output = eps()
        .args(["run", cfg.to_str().unwrap(), "--override", "medium.alpha=2", "--override", "drive.omega=0.5"])
        .args(["--override", "propagator.t_final=5", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("[FAIL] a_gauge.sigma_relative_error"), "{stdout}");
    let report: eps_cli::ExperimentReport =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let failed: Vec<_> = report
        .checks
        .iter()
        .filter(|c| c.status == CheckStatus::Failed)
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.contains(&"a_gauge.sigma_relative_error"), "{failed:?}");
    assert!(failed.contains(&"phi_gauge.sigma_relative_error"), "{failed:?}");

    let status = eps()
        .args(["run", cfg.to_str().unwrap(), "--quiet", "--override", "medium.alpha=-1"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = eps().args(["run", "/nonexistent.toml", "--quiet"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn default_config_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.toml");
    let mut cfg = ExperimentConfig::load(&cfg_path, &[]).unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let report = run_experiment(&cfg).unwrap();
    assert!(report.passed());
    let sigma = report.gauge(GaugeTag::AGauge).unwrap().conductivity.unwrap();
    assert!((sigma.sigma_theory - Complex64::new(0.5, -0.5)).norm() < 1e-15);
    assert!(sigma.relative_error <= 1e-3);

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/default_report.json");
    let got = stable_report(&dir.path().join("report.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&golden, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&fs::read_to_string(&golden).unwrap()).unwrap();
    assert_eq!(got, want);
}
