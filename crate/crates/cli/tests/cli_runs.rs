use std::fs;
use std::path::Path;
use std::process::Command;

use pinn_core::problems::{parse_inversion_history, parse_results_csv, MetricsSummary};

fn pinn(root: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pinn"))
        .args(args)
        .env("PINN_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .expect("pinn runs")
}

const LAPLACE_INVERSE: &str = "\
[problem]
problem=laplace mode=inverse grid=6x6
[network]
hidden=6,6
[training]
epochs=20 seed=5 lr=0.01
[output]
plots=true
";

#[test]
fn run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("lap.cfg");
    fs::write(&cfg, LAPLACE_INVERSE).unwrap();
    let out = pinn(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let dir = tmp.path().join("laplace-inverse-seed5");
    for f in [
        "config.txt",
        "train_log.csv",
        "results.csv",
        "metrics.txt",
        "params.txt",
        "inversion_history.csv",
        "predicted.png",
        "exact.png",
        "abs_error.png",
        "inversion_history.png",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let summary = MetricsSummary::from_text(&fs::read_to_string(dir.join("metrics.txt")).unwrap()).unwrap();
    assert_eq!(summary.epochs_run, 20);
    assert!(summary.physical_value("kappa").is_some());
    let (names, rows) = parse_results_csv(&fs::read_to_string(dir.join("results.csv")).unwrap()).unwrap();
    assert_eq!(names, ["x", "y"]);
    assert!(!rows.is_empty());
    let (params, history) =
        parse_inversion_history(&fs::read_to_string(dir.join("inversion_history.csv")).unwrap()).unwrap();
    assert_eq!(params, ["kappa"]);
    assert_eq!(history.len(), 20);
    let log = fs::read_to_string(dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 21);

    // The written config reproduces the run exactly.
    let again = tmp.path().join("again");
    let mut cfg2 = fs::read_to_string(dir.join("config.txt")).unwrap();
    cfg2.push_str(&format!("dir={}\n", again.display()));
    let cfg2_path = tmp.path().join("again.cfg");
    fs::write(&cfg2_path, cfg2).unwrap();
    let out = pinn(tmp.path(), &["run", cfg2_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read_to_string(again.join("metrics.txt")).unwrap(),
        fs::read_to_string(dir.join("metrics.txt")).unwrap()
    );
}

#[test]
fn seed_override_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("lap.cfg");
    fs::write(&cfg, LAPLACE_INVERSE.replace("inverse", "forward")).unwrap();
    for seed in ["1", "2"] {
        let out = pinn(tmp.path(), &["--seed", seed, "run", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = tmp.path().join("laplace-forward-seed1");
    let b = tmp.path().join("laplace-forward-seed2");
    let out = pinn(tmp.path(), &["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("comparison.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("delta"), "{csv}");
    assert!(csv.contains("window"));
    assert!(tmp.path().join("comparison.txt").is_file());
}

#[test]
fn bad_inputs_exit_with_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "problem=plate\nepochs=0\n").unwrap();
    assert_eq!(pinn(tmp.path(), &["run", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(pinn(tmp.path(), &["run", "/nonexistent.cfg"]).status.code(), Some(1));
    assert_eq!(pinn(tmp.path(), &["reproduce", "rigid-block"]).status.code(), Some(2));
    assert_eq!(pinn(tmp.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn stop_tolerance_reports_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("lin.cfg");
    fs::write(
        &cfg,
        "problem=linear-regression\n[training]\nepochs=5000 stop_tolerance=1e9\n",
    )
    .unwrap();
    let out = pinn(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}
