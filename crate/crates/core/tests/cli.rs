mod common;

use std::path::Path;
use std::process::{Command, Output};

fn fedrem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedrem"))
        .arg("--scenario")
        .arg(dir.join("scenario.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::tiny_scenario().save(dir.path().join("scenario.json")).unwrap();
    dir
}

fn ok(o: &Output) {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unknown_subcommand_fails() {
    let o = Command::new(env!("CARGO_BIN_EXE_fedrem")).arg("frobnicate").output().unwrap();
    assert!(!o.status.success());
}

#[test]
fn missing_scenario_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = fedrem(dir.path(), &["scenario"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.json"));
}

#[test]
fn simulate_writes_chi_batches() {
    let dir = setup();
    ok(&fedrem(dir.path(), &["simulate", "--ns", "64", "--location", "1"]));
    for c in 0..3 {
        let f = dir.path().join(format!("out/chi/loc01_ch{c}.csv"));
        let text = std::fs::read_to_string(f).unwrap();
        assert_eq!(text.lines().count(), 65);
    }
}

#[test]
fn baseline_run_select_inspect_pipeline() {
    let dir = setup();
    let d = dir.path();
    ok(&fedrem(d, &["baseline", "--samples", "1000"]));
    assert!(d.join("out/baseline.json").exists());

    let base = d.join("out/baseline.json");
    ok(&fedrem(
        d,
        &[
            "run", "--mode", "global", "--platoons", "2", "--ns", "128", "--laps", "2",
            "--seeds", "0,3", "--baseline", base.to_str().unwrap(), "--save-maps",
        ],
    ));
    let report = std::fs::read_to_string(d.join("out/report.json")).unwrap();
    assert!(report.contains("\"mode\": \"global\""));
    assert!(d.join("out/report.csv").exists());

    let global = d.join("out/maps/global_seed3.json");
    let saim = d.join("out/maps/saim_seed3.json");
    let o = fedrem(
        d,
        &[
            "select", "--baseline", base.to_str().unwrap(), "--global", global.to_str().unwrap(),
            "--saim", saim.to_str().unwrap(),
        ],
    );
    ok(&o);
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().next().unwrap(), "location,baseline,global,saim");
    assert_eq!(table.lines().count(), 4);
    assert!(d.join("out/selection.csv").exists());

    let o = fedrem(d, &["inspect", global.to_str().unwrap()]);
    ok(&o);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 10);
}

#[test]
fn local_mode_rejects_several_platoons() {
    let dir = setup();
    let o = fedrem(dir.path(), &["run", "--mode", "local", "--platoons", "3", "--ns", "64", "--laps", "1", "--seeds", "1"]);
    assert!(!o.status.success());
}
