use std::process::Command;

use serde_json::Value;

fn ymlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ymlab"));
    c.env("YMLAB_THREADS", "1");
    c
}

fn write(dir: &std::path::Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn passing_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "[grid]\nn = 8\n[data]\nfamily = \"zero\"\n");
    let out = ymlab().arg("invariants").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("pass  algebra/jacobi"), "{text}");
    assert!(text.trim_end().ends_with("invariants: pass"));
    assert!(dir.path().join("o/summary.json").exists());
}

#[test]
fn invalid_config_writes_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "[physics]\nsigma = 1.2\n");
    let o = dir.path().join("o");
    let out = ymlab().arg("evolve").arg("--config").arg(&cfg).arg("--out").arg(&o).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rec: Value = serde_json::from_slice(&std::fs::read(o.join("error.json")).unwrap()).unwrap();
    assert_eq!(rec["status"], "error");
    assert_eq!(rec["kind"], "config");
    assert!(rec["details"][0].as_str().unwrap().contains("sigma"));
}

#[test]
fn unknown_keys_depend_on_strictness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "[grid]\nn = 8\nsize = 3\n[data]\nfamily = \"zero\"\n");
    let run = |flag: &str| {
        ymlab().arg("invariants").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join(flag)).arg(flag).output().unwrap()
    };
    assert_eq!(run("--strict").status.code(), Some(2));
    assert_eq!(run("--lax").status.code(), Some(0));
}

#[test]
fn kind_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "[run]\nkind = \"heatflow\"\n");
    let out = ymlab().arg("evolve").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("heatflow"));
}

#[test]
fn seed_override_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "[grid]\nn = 8\n[integrator]\ndt = 0.05\nT = 0.05\n[output]\ncheckpoint = false\n");
    let csv = |seed: &str| -> String {
        let o = dir.path().join(seed);
        let out = ymlab().arg("evolve").arg("--config").arg(&cfg).arg("--seed").arg(seed).arg("--out").arg(&o).output().unwrap();
        assert!(out.status.code().unwrap() < 2, "{}", String::from_utf8_lossy(&out.stderr));
        let s: Value = serde_json::from_slice(&std::fs::read(o.join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["config"]["data"]["seed"].to_string(), seed);
        std::fs::read_to_string(o.join("results.csv")).unwrap()
    };
    let a = csv("7");
    assert_eq!(a, csv("7"));
    assert_ne!(a, csv("8"));
}
