use std::path::Path;
use std::process::Command;

use attrec::experiments::RunManifest;
use attrec::{DecisionRecord, ModelSet};

fn attrec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_attrec")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = attrec(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn calibrate_then_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    ok(&["calibrate", "--scenario", "exp3", "--out", model.to_str().unwrap()]);
    let models = ModelSet::load(&model).unwrap();
    assert_eq!(models.classifiers.len(), 10);
    assert_eq!(models.bins.len(), 5);

    let catalog = dir.path().join("table1.toml");
    std::fs::write(
        &catalog,
        attrec::simulator::builtin_catalog("table1").unwrap().to_toml_string(),
    )
    .unwrap();
    let obs = dir.path().join("obs.csv");
    std::fs::write(
        &obs,
        "attribute,bin,score\ncylinder,0,0.0\nbottle shape,0,0.0\nyellow color,0,0.0\nred color,0,60.0\nblue color,0,60.0\n",
    )
    .unwrap();
    let out = ok(&[
        "fuse",
        "--catalog",
        catalog.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--obs",
        obs.to_str().unwrap(),
    ]);
    let record: DecisionRecord = serde_json::from_str(&out).unwrap();
    assert_eq!(record.winner.as_deref(), Some("7"));
    assert_eq!(record.posterior.len(), 9);
    let total: f64 = record.posterior.iter().map(|p| p.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let bundled = ok(&[
        "fuse",
        "--catalog",
        "table1",
        "--model",
        model.to_str().unwrap(),
        "--obs",
        obs.to_str().unwrap(),
    ]);
    assert_eq!(bundled, out);
}

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["exp1", "exp2", "exp3"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        for out in [&a, &b] {
            ok(&[
                cmd,
                "--scenario",
                cmd,
                "--trials",
                "40",
                "--seed",
                "5",
                "--out",
                out.to_str().unwrap(),
            ]);
        }
        let manifest: RunManifest = serde_json::from_str(&read(&a.join("manifest.json"))).unwrap();
        assert_eq!(manifest.seed, 5);
        assert_eq!(manifest.scenario.as_deref(), Some(cmd));
        assert_eq!(manifest.scenario_sha256.as_ref().map(String::len), Some(64));
        for file in &manifest.outputs {
            assert_eq!(read(&a.join(file)), read(&b.join(file)), "{cmd}/{file}");
        }
        assert_eq!(read(&a.join("manifest.json")), read(&b.join("manifest.json")));
    }
    assert!(read(&dir.path().join("exp2-a/exp2.csv")).starts_with("K,method,error,halfwidth\n"));
    assert!(read(&dir.path().join("exp3-a/exp3.csv")).starts_with("bin,method,accuracy,halfwidth\n"));
}

#[test]
fn theorems_report_and_exit_status() {
    let out = ok(&["theorems", "--trials", "3000", "--cases", "200", "--seed", "4"]);
    assert!(out.trim_end().ends_with("PASS"));
    assert!(out.contains("200/200 correct"));
    // Too few trials to see any residual error at K = 5: the strict drop fails.
    let out = attrec(&["theorems", "--trials", "10", "--cases", "10", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let out = attrec(&["exp2", "--scenario", "nope", "--out", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}
