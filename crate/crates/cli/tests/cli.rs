use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fdp_core::io::{read_profile, read_table_file, PROFILE_HEADER};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn fdp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run(cmd: &str, cfg: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(cfg);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    (fdp(&args, dir.path()), dir)
}

fn read(dir: &tempfile::TempDir, name: &str) -> Vec<u8> {
    std::fs::read(dir.path().join(name)).unwrap()
}

#[test]
fn unknown_keys_are_rejected() {
    let (out, _d) = run("compose", "counterexample.cfg", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown key"), "{err}");
}

#[test]
fn bad_values_exit_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "regime = 0\nq = 0.01,abc\n").unwrap();
    let out = fdp(&["moments", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = fdp(&["compose"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn moments_output_round_trips() {
    let (out, d) = run("moments", "moments_regime0.cfg", &[]);
    assert!(out.status.success());
    let header = ["q", "sigma", "rel_err_mean", "rel_err_var", "ratio_mean_over_var"];
    let rows = read_table_file(&d.path().join("moments_regime0.csv"), &header).unwrap();
    assert_eq!(rows.len(), 28);
    let (_, d2) = run("moments", "moments_regime0.cfg", &[]);
    assert_eq!(read(&d, "moments_regime0.csv"), read(&d2, "moments_regime0.csv"));
}

#[test]
fn compose_decisions() {
    for (cfg, code) in [("compose_gaussian.cfg", 0), ("compose_gaussian_halt.cfg", 0), ("compose_empty.cfg", 0)] {
        let (out, d) = run("compose", cfg, &[]);
        assert_eq!(out.status.code(), Some(code), "{cfg}: {}", String::from_utf8_lossy(&out.stdout));
        let h = read_profile(std::fs::File::open(d.path().join("profile.csv")).unwrap()).unwrap();
        assert!(h.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let s: serde_json::Value = serde_json::from_slice(&read(&d, "decision.json")).unwrap();
        assert!(s["decision"] == "continue" || s["decision"] == "halt");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wrong.cfg");
    std::fs::write(&cfg, "factors = gaussian 1; gaussian 1\nbudget = gaussian 1.3\nexpect = continue\n").unwrap();
    let out = fdp(&["compose", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let rows = read_table_file(&dir.path().join("profile.csv"), &PROFILE_HEADER).unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn accountant_runs_are_deterministic() {
    let (a, da) = run("accountant-run", "accountant_regime1.cfg", &[]);
    let (b, db) = run("accountant-run", "accountant_regime1.cfg", &[]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(read(&da, "steps.csv"), read(&db, "steps.csv"));
    let s: serde_json::Value = serde_json::from_slice(&read(&da, "summary.json")).unwrap();
    assert_eq!(s["steps"], 23);
    assert_eq!(s["conservation_error"], 0.0);
}

#[test]
fn individual_mode_runs() {
    let (out, d) = run("accountant-run", "accountant_individual.cfg", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let s: serde_json::Value = serde_json::from_slice(&read(&d, "summary.json")).unwrap();
    let budgets = s["budgets"].as_array().unwrap();
    assert_eq!(budgets.len(), 50);
    assert!(budgets.iter().all(|b| (0.0..=0.5).contains(&b.as_f64().unwrap())));
    let (again, d2) = run("accountant-run", "accountant_individual.cfg", &[]);
    assert!(again.status.success());
    assert_eq!(read(&d, "steps.csv"), read(&d2, "steps.csv"));
    let (other, d3) = run("accountant-run", "accountant_individual.cfg", &["--seed", "99"]);
    assert!(other.status.success());
    assert_ne!(read(&d, "steps.csv"), read(&d3, "steps.csv"));
}
