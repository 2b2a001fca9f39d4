use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polyspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn critical_run_writes_hashed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "critical.json",
        r#"{"kind": "critical", "model": {"preset": "dimer", "v": 0.5, "p": 0.5}}"#,
    );
    let out = dir.path().join("out");
    let o = polyspec(&["critical", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("critical.json")).unwrap()).unwrap();
    let hash = summary["config_hash"].as_str().unwrap().to_owned();
    let energies: Vec<f64> = summary["statistics"]["critical_energies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["energy"].as_f64().unwrap())
        .collect();
    assert_eq!(energies.len(), 2);
    assert!((energies[0] + 0.5).abs() < 1e-8 && (energies[1] - 0.5).abs() < 1e-8);

    let csv = fs::read_to_string(out.join("critical.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("config_hash,energy,"));
    assert!(lines.all(|l| l.starts_with(&hash)));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "les.json",
        r#"{"kind": "les-poisson", "seed": 5,
            "params": {"l": 400, "window_atoms": 8, "samples": 40, "ids_realizations": 100,
                       "min_gaps": 100, "intervals": []}}"#,
    );
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        let o = polyspec(&["les-poisson", "--config", &cfg, "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
        files.push((
            fs::read(out.join("les-poisson.csv")).unwrap(),
            fs::read(out.join("les-poisson.json")).unwrap(),
        ));
    }
    assert_eq!(files[0].0, files[1].0);
    let strip = |bytes: &[u8]| {
        let mut v: Value = serde_json::from_slice(bytes).unwrap();
        v["config"]["workers"] = Value::Null;
        v["config"]["output_dir"] = Value::Null;
        v
    };
    assert_eq!(strip(&files[0].1), strip(&files[1].1));
}

#[test]
fn validate_reports_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sharp.json", r#"{"kind": "sharpness", "params": {"delta": 0.4}}"#);
    let o = polyspec(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.delta: δ must exceed 1/2"));

    let cfg = write_config(
        dir.path(),
        "preset.json",
        r#"{"kind": "critical", "model": {"preset": "trimer", "v": 0.5, "p": 0.5}}"#,
    );
    let o = polyspec(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("available: dimer, anderson"));

    let cfg = write_config(dir.path(), "ok.json", r#"{"kind": "critical"}"#);
    assert_eq!(polyspec(&["validate", "--config", &cfg]).status.code(), Some(0));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p1.json", r#"{"kind": "critical", "model": {"preset": "dimer", "v": 0.5, "p": 1.0}}"#);
    assert_eq!(polyspec(&["critical", "--config", &cfg]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "mismatch.json", r#"{"kind": "critical"}"#);
    assert_eq!(polyspec(&["lyapunov", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(polyspec(&["critical", "--config", "/nonexistent.json"]).status.code(), Some(1));
}

#[test]
fn failed_check_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // a fraction above 1 cannot be met
    let cfg = write_config(
        dir.path(),
        "clock.json",
        r#"{"kind": "les-clock", "params": {"l": 400, "window_atoms": 8, "samples": 20,
            "min_fraction_near_one": 1.01}}"#,
    );
    let out = dir.path().join("out");
    let o = polyspec(&["les-clock", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL fraction_near_one"));
}
