use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[screen]
periods = 5
steps_per_period = 200

[scaling]
accel_scale = 10.0

[run]
framework = "truth"
preset = "explicit"
train_periods = 2
extrap_periods = 1
steps_per_period = 200
ics = "ics.csv"

[sweep]
frameworks = ["truth"]
sigma_accel = [0.0, 0.1]
"#;

fn orbitlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbitlearn")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn end_to_end_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let ics = dir.path().join("ics.csv");

    let out = orbitlearn(&["gen-ics", "--count", "3", "--seed", "4", "--out", s(&ics), "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&ics).unwrap().lines().count(), 4);

    let run_dir = dir.path().join("run");
    let out = orbitlearn(&["run", "--config", s(&cfg), "--ic-index", "2", "--out", s(&run_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "samples.csv", "model.json", "train.csv", "train.json", "extrap_test.csv", "timing.json"] {
        assert!(run_dir.join(f).is_file(), "{f}");
    }
    let out = orbitlearn(&["report", "--in", s(&run_dir)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);

    let sweep_dir = dir.path().join("sweep");
    let out = orbitlearn(&["sweep", "--config", s(&cfg), "--out", s(&sweep_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(sweep_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let out = orbitlearn(&["report", "--in", s(&sweep_dir), "--format", "csv"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), summary);
    let out = orbitlearn(&["report", "--in", s(&sweep_dir), "--format", "json"]);
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nframework = \"svm\"\n").unwrap();
    let out = orbitlearn(&["run", "--config", s(&bad), "--ic-index", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.toml");
    let out = orbitlearn(&["run", "--config", s(&missing), "--ic-index", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));

    let out = orbitlearn(&["report", "--in", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}
