use std::path::PathBuf;
use std::process::{Command, Output};

fn gaugelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugelab")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gaugelab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn strip_timestamp(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn list_names_every_scenario() {
    let out = gaugelab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in gaugelab::experiments::scenario_names() {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn passing_run_writes_json_and_csv() {
    let dir = scratch("pass");
    let out = gaugelab(&["run", "monopole_exactness", "--out", dir.to_str().unwrap(), "--seed", "3", "--workers", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(dir.join("monopole_exactness.json")).unwrap();
    let report = gaugelab::Report::from_json(&json).unwrap();
    assert!(report.passed());
    assert_eq!(report.config.seed, 3);
    let csv = std::fs::read_to_string(dir.join("monopole_exactness.csv")).unwrap();
    assert_eq!(csv.lines().count(), report.cases.len() + 1);
    assert!(csv.starts_with("case,pass,error,bound"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = scratch("fail");
    let cfg = dir.join("tight.json");
    std::fs::write(&cfg, r#"{"scenario": "ignored", "tolerances": {"ratio": 1e-300}}"#).unwrap();
    let out = gaugelab(&["run", "constants_sphere", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
    assert!(dir.join("constants_sphere.json").exists());
}

#[test]
fn bad_input_exits_two() {
    let dir = scratch("bad");
    assert_eq!(gaugelab(&["run", "no_such_scenario", "--out", dir.to_str().unwrap()]).status.code(), Some(2));
    let cfg = dir.join("typo.json");
    std::fs::write(&cfg, r#"{"sedes": 4}"#).unwrap();
    let out = gaugelab(&["run", "monopole_exactness", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_agree_except_for_timestamp() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for (dir, workers) in [(&a, "1"), (&b, "2")] {
        let out = gaugelab(&["run", "unitary_identities", "--out", dir.to_str().unwrap(), "--seed", "11", "--workers", workers]);
        assert!(out.status.success());
    }
    let ja = std::fs::read_to_string(a.join("unitary_identities.json")).unwrap();
    let jb = std::fs::read_to_string(b.join("unitary_identities.json")).unwrap();
    let (mut va, mut vb) = (strip_timestamp(&ja), strip_timestamp(&jb));
    va["config"]["workers"] = serde_json::Value::Null;
    vb["config"]["workers"] = serde_json::Value::Null;
    assert_eq!(va, vb);
    assert_eq!(
        std::fs::read_to_string(a.join("unitary_identities.csv")).unwrap(),
        std::fs::read_to_string(b.join("unitary_identities.csv")).unwrap()
    );
}
