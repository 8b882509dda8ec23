use std::fs;
use std::process::Command;

fn paraexp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_paraexp"));
    cmd.env_remove("PARAEXP_WORKERS");
    cmd
}

#[test]
fn rlc_run_succeeds_and_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = paraexp()
        .args(["--experiment", "rlc", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("paraexp/rk4 max-error ratio"));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("paraexp/rk4 max-error ratio,")));
}

#[test]
fn configuration_errors_exit_with_2() {
    for args in [
        vec!["--experiment", "rlc", "--dt", "-1"],
        vec!["--experiment", "rlc", "--workers", "0"],
        vec!["--experiment", "rlc", "--stepper", "leapfrog"],
        vec!["--experiment", "wave", "--taylor-m", "10"],
        vec!["--dt", "1e-5"],
        vec!["--experiment", "nonsense"],
    ] {
        let status = paraexp().args(&args).status().unwrap();
        assert_eq!(status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let status = paraexp()
        .args(["--experiment", "rlc", "--out"])
        .arg(blocker.join("sub"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn workers_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = paraexp()
        .env("PARAEXP_WORKERS", "2")
        .args(["--experiment", "rlc", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let meta = fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
    assert!(meta.contains("workers = 2"));
    assert!(meta.contains("worker 2 = v_2 and w_1"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "experiment = rlc\nworkers = 4\ndt = 2e-5\n").unwrap();
    let status = paraexp()
        .arg("--config")
        .arg(&cfg)
        .args(["--workers", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let meta = fs::read_to_string(dir.path().join("metadata.txt")).unwrap();
    assert!(meta.contains("workers = 1"));
    assert!(meta.contains("dt = 2e-5"));
}
