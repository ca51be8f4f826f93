// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_loewnerlab"));
    c.env_remove("LOEWNERLAB_SEED");
    c
}

fn write_config(dir: &Path, name: &str, cfg: Value) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    let o = cmd.output().expect("binary runs");
    eprintln!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr));
    o
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

#[test]
fn canonical_drift_audit_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "audit",
        json!({"experiment": "drift-audit", "mode": "welding", "kappa": 2.0, "x": [-1.0, 0.0, 1.5], "point": [0.3, 0.7]}),
    );
    let out = tmp.path().join("out");
    let o = run(bin().arg("run").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&out.join("audit/report.json"));
    assert!(report["residual"].as_f64().unwrap() < 1e-10);
    let manifest = read_json(&out.join("audit/manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["kappa"], 2.0);
    assert_eq!(manifest["versions"]["loewnerlab"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn missing_kappa_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "nokappa",
        json!({"experiment": "capacity", "x0": [-1.0, 0.0, 1.0], "T": 0.25}),
    );
    let out = tmp.path().join("out");
    let o = run(bin().arg("run").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    let manifest = read_json(&out.join("nokappa/failed/manifest.json"));
    assert_eq!(manifest["status"], "validation-failure");
    assert!(manifest["error"].as_str().unwrap().contains("kappa"));
    // nothing was computed
    assert!(!out.join("nokappa/failed/path.csv").exists());
    assert!(!out.join("nokappa/manifest.json").exists());
}

#[test]
fn misspelt_parameter_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "typo",
        json!({"experiment": "simulate", "kapa": 2.0, "kappa": 2.0, "x0": [0.0], "T": 0.1}),
    );
    let o = run(bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_json_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("broken.json");
    fs::write(&p, "{ \"experiment\": ").unwrap();
    let o = run(bin().arg("run").arg(&p).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(tmp.path().join("broken/failed/manifest.json").exists());
}

#[test]
fn capacity_of_three_slits() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cap",
        json!({"experiment": "capacity", "kappa": 2.0, "x0": [-1.0, 0.0, 1.0], "T": 0.25, "seed": 5}),
    );
    let out = tmp.path().join("out");
    let o = run(bin().arg("run").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&out.join("cap/report.json"));
    let c = report["estimates"][0]["fit"]["capacity"].as_f64().unwrap();
    assert!((c - 1.5).abs() < 1.5e-2, "capacity {c}");
}

#[test]
fn missed_threshold_exits_3_into_failed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "strict",
        json!({"experiment": "capacity", "kappa": 2.0, "x0": [0.0], "T": 0.1, "tolerance": 1e-15}),
    );
    let out = tmp.path().join("out");
    let o = run(bin().arg("run").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(3));
    let manifest = read_json(&out.join("strict/failed/manifest.json"));
    assert_eq!(manifest["status"], "check-failed");
    // partial outputs are kept
    assert!(out.join("strict/failed/path.csv").exists());
    assert!(out.join("strict/failed/report.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "sim",
        json!({"experiment": "simulate", "model": "dyson", "kappa": 1.0, "beta": 2.0, "x0": [-1.0, 0.0, 1.0], "T": 0.2, "seed": 9}),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run(bin().arg("run").arg(&cfg).arg("--out").arg(&a)).status.code(), Some(0));
    assert_eq!(run(bin().arg("run").arg(&cfg).arg("--out").arg(&b)).status.code(), Some(0));
    let pa = fs::read(a.join("sim/path.csv")).unwrap();
    assert_eq!(pa, fs::read(b.join("sim/path.csv")).unwrap());
    assert_eq!(fs::read(a.join("sim/report.json")).unwrap(), fs::read(b.join("sim/report.json")).unwrap());
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seeded",
        json!({"experiment": "simulate", "kappa": 1.0, "x0": [0.0], "T": 0.05, "seed": 3}),
    );
    let seed_of = |cmd: &mut Command, tag: &str| {
        let out = tmp.path().join(tag);
        assert_eq!(run(cmd.arg("run").arg(&cfg).arg("--out").arg(&out)).status.code(), Some(0));
        let m = read_json(&out.join("seeded/manifest.json"));
        (m["seed"].as_u64().unwrap(), m["seed_source"].as_str().unwrap().to_owned())
    };
    assert_eq!(seed_of(&mut bin(), "cfg"), (3, "config".into()));
    assert_eq!(seed_of(bin().env("LOEWNERLAB_SEED", "0x10"), "env"), (16, "env".into()));
    assert_eq!(seed_of(bin().env("LOEWNERLAB_SEED", "16").arg("--seed").arg("7"), "flag"), (7, "flag".into()));
}

#[test]
fn suite_runs_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("suite");
    fs::create_dir(&dir).unwrap();
    write_config(&dir, "a", json!({"experiment": "cft-check", "kappas": [2.0, 6.0], "configs": 10}));
    write_config(&dir, "b", json!({"experiment": "flowline", "anchors": [0.0, 1.0], "kappas": [1.0, 4.0]}));
    let out = tmp.path().join("out");
    let o = run(bin().arg("suite").arg(&dir).arg("--out").arg(&out).arg("--threads").arg("2"));
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&out.join("suite.json"));
    assert_eq!(s["scenarios"].as_array().unwrap().len(), 2);
    assert!(out.join("a/report.json").exists() && out.join("b/report.json").exists());
}

#[test]
fn list_names_every_experiment() {
    let o = run(bin().arg("list"));
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for e in [
        "simulate",
        "trace",
        "capacity",
        "drift-audit",
        "cross-variation",
        "stationarity",
        "cft-check",
        "flowline",
        "boundary-length",
    ] {
        assert!(text.lines().any(|l| l.starts_with(e)), "{e}");
    }
}

#[test]
fn bundled_scenarios_name_known_experiments() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/reference-suite");
    let list = String::from_utf8(run(bin().arg("list")).stdout).unwrap();
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let cfg = read_json(&entry.unwrap().path());
        let exp = cfg["experiment"].as_str().unwrap();
        assert!(list.lines().any(|l| l.split_whitespace().next() == Some(exp)), "{exp}");
        count += 1;
    }
    assert!(count >= 11);
}
