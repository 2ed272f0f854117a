use std::path::Path;
use std::process::Command;

use dbm_edge::harness::persist::load;
use dbm_edge::harness::run::MANIFEST_FILE;
use dbm_edge::harness::{run_experiment, Experiment, RunConfig, RunManifest};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dbm-edge"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn passing_run_exits_zero_and_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("edge.cfg");
    write(&cfg, "# V = 0\nn = 30\nt = 1\ninitial = point-mass:0\n");
    let out = dir.path().join("out");
    let st = bin().args(["edge-law", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap().status;
    assert_eq!(st.code(), Some(0));
    let m: RunManifest = load(&out.join(MANIFEST_FILE)).unwrap();
    assert!(m.complete && m.passed);
    assert!(out.join("report/summary.txt").exists() && out.join("report/density.dat").exists());
}

#[test]
fn failed_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // at E = 0 a point mass gives Im m / profile = eta^{-3/2}, 1000 at eta_* = 0.01
    let st = bin()
        .args(["regularity", "--set", "n=50", "--set", "eta_star=0.01", "--set", "initial=point-mass:0", "--no-report", "--out"])
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(2));
    let m: RunManifest = load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(m.complete && !m.passed);
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    write(&cfg, "experiment = rigidity\nn = 30\n");
    let st = bin().args(["edge-law", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap().status;
    assert_eq!(st.code(), Some(1), "experiment mismatch");
    let st = bin().args(["simulate", "--set", "bogus=1"]).arg("--out").arg(dir.path()).output().unwrap().status;
    assert_eq!(st.code(), Some(1), "unknown key");
    let st = bin().args(["simulate", "--set", "n=30", "--out"]).arg(dir.path()).output().unwrap().status;
    assert_eq!(st.code(), Some(1), "missing time");
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["edge-law", "--set", "n=20", "--set", "t=0.5", "--no-report"])
        .env("DBM_EDGE_OUT", dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(st.code(), Some(0));
    assert!(dir.path().join(MANIFEST_FILE).exists());
}

fn simulate_cfg(dir: &Path, seed: u64, workers: usize) -> RunConfig {
    let mut cfg = RunConfig::new(Experiment::Simulate);
    cfg.n = 40;
    cfg.t = Some(0.3);
    cfg.trials = 12;
    cfg.master_seed = seed;
    cfg.workers = workers;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

#[test]
fn same_seed_gives_identical_digests() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_experiment(&simulate_cfg(a.path(), 11, 1)).unwrap();
    let mb = run_experiment(&simulate_cfg(b.path(), 11, 1)).unwrap();
    assert_eq!(ma.outputs, mb.outputs);
    let mc = run_experiment(&simulate_cfg(c.path(), 12, 1)).unwrap();
    assert_ne!(ma.outputs, mc.outputs);
}

#[test]
fn worker_count_does_not_change_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_experiment(&simulate_cfg(a.path(), 3, 1)).unwrap();
    let mb = run_experiment(&simulate_cfg(b.path(), 3, 4)).unwrap();
    assert_eq!(ma.outputs, mb.outputs);
}

#[test]
fn sde_route_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mk = |d: &Path| {
        let mut cfg = simulate_cfg(d, 5, 2);
        cfg.n = 20;
        cfg.trials = 4;
        cfg.t = Some(0.05);
        cfg.set("route", "sde").unwrap();
        cfg
    };
    let ma = run_experiment(&mk(a.path())).unwrap();
    let mb = run_experiment(&mk(b.path())).unwrap();
    assert_eq!(ma.outputs, mb.outputs);
}
