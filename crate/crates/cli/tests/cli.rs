use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qsample(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsample"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn sample_trace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/sample_node.txt")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_series_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("series.csv");
    let o = qsample(&["synth", "--scenario", "evolving-iii", "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let series = fs::read_to_string(&out).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next(), Some("timestamp_iso8601,epoch_s,value_c"));
    assert_eq!(lines.next(), Some("2004-03-01T00:00:00,1078099200,20"));
    assert_eq!(series.lines().count(), 4 * 2880 + 1);

    let truth = fs::read_to_string(dir.path().join("series.truth.csv")).unwrap();
    assert!(truth.starts_with("epoch_s,expected_interval_s\n1078099200,60\n"));
    assert!(truth.trim_end().ends_with(",30"));
}

#[test]
fn synth_rejects_unknown_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsample(&["synth", "--scenario", "controlled-45", "-o", s(&dir.path().join("x.csv"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("controlled-45"));
}

#[test]
fn ingest_reports_skips_and_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = qsample(&["ingest", "--format", "intel_lab", "--node", "7", "--seed", "1", "-i", s(&sample_trace()), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.starts_with("skipped="), "{stderr}");
    assert!(stderr.contains("missing_field:"));

    let csv = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "timestamp_iso8601,node_id,value_c");
    assert!(rows[1].starts_with("2004-02-28T00:00:00,7,"));
    assert!(rows[2].starts_with("2004-02-28T00:00:30,7,"));

    // Same seed, same output; different seed, different noise.
    let again = dir.path().join("again.csv");
    qsample(&["ingest", "--node", "7", "--seed", "1", "-i", s(&sample_trace()), "-o", s(&again)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
    let other = dir.path().join("other.csv");
    qsample(&["ingest", "--node", "7", "--seed", "2", "-i", s(&sample_trace()), "-o", s(&other)]);
    assert_ne!(fs::read(&out).unwrap(), fs::read(&other).unwrap());
}

#[test]
fn run_writes_json_and_log_csv() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("run.json");
    let log = dir.path().join("log.csv");
    let o = qsample(&[
        "run", "--scenario", "controlled-120", "--alpha", "0.9", "--gamma", "0.1", "--epsilon", "0.1",
        "--seed", "4", "-o", s(&json), "--log-csv", s(&log),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["scenario"], "controlled-120");
    assert_eq!(v["config"]["params"]["alpha"], 0.9);
    assert_eq!(v["config"]["seed"], 4);
    let decisions = v["summary"]["decisions"].as_u64().unwrap();
    assert_eq!(v["log"].as_array().unwrap().len() as u64, decisions);
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count() as u64, decisions + 1);
    assert!(v["report"]["convergence_s"].is_number());
}

#[test]
fn run_on_trace_file_uses_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("run.json");
    let o = qsample(&["run", "--scenario", s(&sample_trace()), "--seed", "1", "-o", s(&json)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["config"]["calibration_duration"], 43_200);
    assert!(v["report"]["convergence_s"].is_null());

    let o = qsample(&["run", "--scenario", "no/such/file.txt", "-o", s(&json)]);
    assert!(!o.status.success());
}

#[test]
fn sweep_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.json");
    fs::write(
        &spec,
        r#"{"alphas": [0.8, 0.9], "gammas": [0.1], "seeds": [1, 2],
            "scenarios": ["controlled-60", "controlled-240"], "workers": 2}"#,
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = qsample(&["sweep", "--spec", s(&spec), "-o", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("| α | γ |"));
    }
    let aggregate = fs::read_to_string(out_a.join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 3);
    assert_eq!(fs::read_to_string(out_a.join("runs.csv")).unwrap().lines().count(), 9);
    let per_run = fs::read_dir(&out_a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("run-"))
        .count();
    assert_eq!(per_run, 8);
    for name in ["aggregate.csv", "runs.csv"] {
        assert_eq!(fs::read(out_a.join(name)).unwrap(), fs::read(out_b.join(name)).unwrap());
    }
}

#[test]
fn sweep_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.json");
    fs::write(&spec, r#"{"alphas": [0.9], "gammas": [0.1], "seeds": [1], "scenarios": ["controlled-60"], "calibration_hours": 200}"#).unwrap();
    let o = qsample(&["sweep", "--spec", s(&spec), "-o", s(&dir.path().join("out"))]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("controlled-60 alpha=0.9 gamma=0.1 seed=1"), "{stderr}");
}
