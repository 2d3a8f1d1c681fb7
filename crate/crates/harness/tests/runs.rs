use std::collections::BTreeSet;

use serde_json::Value;
use ymlab_harness::config::{Family, Group};
use ymlab_harness::output::{CSV_FILE, SCHEMA_FILE, SUMMARY_FILE};
use ymlab_harness::{execute, run, ExperimentConfig, Kind};

fn small(kind: Kind) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.run.kind = Some(kind);
    c.grid.n = 8;
    c.integrator.dt = 0.02;
    c.integrator.t_end = 0.1;
    c
}

#[test]
fn invariants_pass_on_zero_data() {
    let mut c = small(Kind::Invariants);
    c.data.family = Family::Zero;
    let out = execute(&c).unwrap();
    assert!(out.summary.passed(), "{:#?}", out.summary.measurements);
    let crits: BTreeSet<u32> = out.summary.measurements.iter().map(|m| m.criterion).collect();
    assert!(crits.contains(&1) && crits.contains(&5));
}

#[test]
fn abelian_plane_wave_evolves_exactly() {
    let mut c = small(Kind::Evolve);
    c.physics.group = Group::U1;
    c.data.family = Family::PlaneWave;
    let out = execute(&c).unwrap();
    let drift = out.table.column("energy_drift").unwrap();
    assert!(drift.iter().all(|d| *d < 1e-8), "{drift:?}");
    let err = out.summary.measurement("hyperbolic-evolution/plane-wave-error").unwrap();
    assert!(err.value < 1e-6, "{err:?}");
    assert_eq!(out.checkpoints.len(), 1);
    let t = out.table.column("t").unwrap();
    assert!((t.last().unwrap() - 0.1).abs() < 1e-12);
    let back = out.checkpoints[0].1.to_cauchy().unwrap();
    assert!((back.t - 0.1).abs() < 1e-12);
}

#[test]
fn sweep_reports_each_frequency() {
    let mut c = small(Kind::AclSweep);
    c.physics.sweep = vec![2.0, 4.0];
    c.integrator.intervals = 2;
    c.integrator.t_end = 0.08;
    c.integrator.growth = 0.5;
    let out = execute(&c).unwrap();
    assert_eq!(out.table.column("n_freq").unwrap(), vec![2.0, 4.0]);
    assert!(out.table.column("drift").unwrap().iter().all(|d| d.is_finite() && *d >= 0.0));
    let slope = out.table.column("slope").unwrap();
    assert_eq!(slope[0].to_bits(), slope[1].to_bits());
    assert!(out.summary.measurement("almost-conservation/slope").is_some());
}

#[test]
fn mkg_needs_the_abelian_group() {
    assert!(execute(&small(Kind::Mkg)).is_err());
    let mut c = small(Kind::Mkg);
    c.physics.group = Group::U1;
    let out = execute(&c).unwrap();
    let m = out.summary.measurement("mkg/charge-drift").unwrap();
    assert_eq!(m.pass, Some(true), "{m:?}");
}

#[test]
fn missing_kind_is_an_error() {
    let mut c = small(Kind::Evolve);
    c.run.kind = None;
    assert!(execute(&c).is_err());
}

fn artifacts(dir: &std::path::Path) -> Vec<Vec<u8>> {
    let mut names: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    names.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn artifacts_are_self_describing_and_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut c = small(Kind::Heatflow);
    c.output.dir = a.path().to_string_lossy().into_owned();
    let summary = run(&c).unwrap();
    c.output.dir = b.path().to_string_lossy().into_owned();
    assert_eq!(run(&c).unwrap(), summary);
    assert_eq!(artifacts(a.path()), artifacts(b.path()));

    let csv = std::fs::read_to_string(a.path().join(CSV_FILE)).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let schema: Value = serde_json::from_slice(&std::fs::read(a.path().join(SCHEMA_FILE)).unwrap()).unwrap();
    let described: Vec<&str> = schema["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(header, described);
    assert!(schema["columns"].as_array().unwrap().iter().all(|c| !c["description"].as_str().unwrap().is_empty()));

    let s: Value = serde_json::from_slice(&std::fs::read(a.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(s["experiment"], "heatflow");
    assert!(s["config"].get("output").is_none());
    assert_eq!(s["config"]["grid"]["n"], 8);
    assert!(s["measurements"].as_array().unwrap().iter().all(|m| m["criterion"].as_u64().is_some()));
    assert!(a.path().join("flow.ckpt").exists());
}

#[test]
fn checkpoints_can_be_disabled() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Kind::Evolve);
    c.output.dir = dir.path().to_string_lossy().into_owned();
    c.output.checkpoint = false;
    run(&c).unwrap();
    assert!(!dir.path().join("final.ckpt").exists());
    assert!(dir.path().join(SUMMARY_FILE).exists());
}
