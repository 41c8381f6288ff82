use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs-noma"))
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/table1.cfg");
    let out = bin()
        .args(["simulate", "--config", cfg, "--trials", "2", "--n-grid", "8", "--m-grid", "6,8"])
        .args(["--methods", "proposed,conventional", "--seed", "3", "--workers", "1"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["summary.csv", "ici.csv", "convergence_stage1.csv", "convergence_stage2.csv", "plot_results.py", "manifest.txt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "num_clusters = 5\nwidgets = 3\n").unwrap();
    let out = bin()
        .args(["simulate", "--trials", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("widgets"));
}

#[test]
fn unknown_method_is_rejected() {
    let out = bin().args(["simulate", "--methods", "greedy"]).output().unwrap();
    assert!(!out.status.success());
}
