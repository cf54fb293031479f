use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpgmres")).args(args).output().expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn solve_ir_writes_history_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["solve", "--gen", "laplace2d:20", "--solver", "ir", "--m", "20", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("converged=true"), "{stdout}");
    let conv = csv_rows(&dir.path().join("convergence.csv"));
    assert_eq!(conv[0], "iteration,implicit_relres,explicit_relres,phase");
    let summary = csv_rows(&dir.path().join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert!(summary[0].contains("spmv_s"));
}

#[test]
fn solve_with_config_file_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "gen=laplace2d:15 solver=double precond=jacobi:5 rhs=normal seed=4\n").unwrap();
    let o = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--solver",
        "ir",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("solver=ir precond=jacobi:5"), "{stdout}");
}

#[test]
fn invalid_configurations_fail_cleanly() {
    for args in [
        vec!["solve", "--gen", "laplace2d:10", "--solver", "fd"],
        vec!["solve", "--gen", "laplace2d:10", "--solver", "fd", "--switch-iter", "30", "--m", "20"],
        vec!["solve", "--gen", "laplace2d:10", "--solver", "single", "--tol", "1e-10"],
        vec!["solve", "--solver", "double"],
        vec!["solve", "--gen", "laplace2d:10", "--precond", "jacobi:0"],
    ] {
        let o = run(&args);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn sweeps_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["sweep-switch", "--gen", "laplace2d:15", "--m", "15", "--switch-iter", "45", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("sweep_switch.csv")).len(), 1 + 2 + 4);

    let o = run(&["sweep-restart", "--gen", "laplace2d:15", "--restarts", "10,20", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("sweep_restart.csv")).len(), 3);

    let o = run(&["sweep-rhs", "--gen", "laplace2d:15", "--seed", "9", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("sweep_rhs.csv")).len(), 4);
}

#[test]
fn spmv_bench_reports_each_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "spmv-bench",
        "--gen",
        "laplace2d:20",
        "--gen",
        "laplace3d:8",
        "--reps",
        "5",
        "--trials",
        "1",
        "--warmup",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("spmv_bench.csv")).len(), 3);
}
