use std::path::Path;
use std::process::{Command, Output};

fn nanomag(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanomag"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stderr).expect("error report is JSON")
}

#[test]
fn trace_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let output = nanomag(dir.path(), &["trace", "--order", "second", "--tmax", "0.05", "--points", "51", "--covariance"]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace_second.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,E_raw,E_normalized,engine,partition,purity,trace_defect");
    assert_eq!(lines.count(), 51);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace_second.json")).unwrap()).unwrap();
    assert_eq!(sidecar["kind"], "trace");
    assert_eq!(sidecar["config"]["smm"]["name"], "Fe8");
    assert!(dir.path().join("means.csv").exists());
    assert!(dir.path().join("covariance_second.csv").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["trace", "--preset", "mn12", "--tmax", "0.03", "--points", "31", "--per-time-partition"];
    assert!(nanomag(a.path(), &args).status.success());
    assert!(nanomag(b.path(), &args).status.success());
    let read = |d: &Path| std::fs::read(d.join("trace_zeroth.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn overrides_and_config_files_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "preset = \"mn12\"\n[smm]\nn_bath = 10\n").unwrap();
    let output = nanomag(
        dir.path(),
        &["sweep-bath", "--config", cfg.to_str().unwrap(), "--set", "coupling_g=2e7", "--sizes", "10,20", "--tmax", "0.02", "--points", "21"],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep_bath.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["smm"]["name"], "Mn12");
    assert_eq!(sidecar["config"]["coupling_g"], 2e7);
    let csv = std::fs::read_to_string(dir.path().join("sweep_bath.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 + 1);
}

#[test]
fn failures_report_machine_readable_errors() {
    let dir = tempfile::tempdir().unwrap();
    let output = nanomag(dir.path(), &["trace", "--set", "smm.d_axial=1e5"]);
    assert!(!output.status.success());
    let err = stderr_json(&output);
    assert_eq!(err["error"], "invalid_regime");

    let output = nanomag(dir.path(), &["trace", "--set", "no_equals_sign"]);
    assert!(!output.status.success());
    assert_eq!(stderr_json(&output)["error"], "config_parse");

    let output = nanomag(dir.path(), &["trace", "--tmax", "0.01", "--points", "1"]);
    assert!(!output.status.success());
    assert_eq!(stderr_json(&output)["error"], "invalid_grid");
}

#[test]
fn small_density_matrix_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let output = nanomag(
        dir.path(),
        &["compare-dm", "--spin", "1", "--levels", "2", "--multipliers", "1", "--tmax", "0.005", "--points", "6"],
    );
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let summary = std::fs::read_to_string(dir.path().join("compare_dm_summary.csv")).unwrap();
    let engines: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(engines, ["dm", "cm-zeroth", "cm-first", "cm-second"]);
}
