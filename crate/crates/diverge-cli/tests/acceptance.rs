//! Byte-level determinism: every subcommand, run twice on the same inputs,
//! must produce identical stdout and identical output files.

use std::path::{Path, PathBuf};

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

/// Runs the binary and returns `(stdout bytes, bytes of each output file)`.
fn run_once(args: &[String], outputs: &[&Path]) -> (Vec<u8>, Vec<Vec<u8>>) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_diverge"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "args {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    let files = outputs
        .iter()
        .map(|p| std::fs::read(p).expect("output file written"))
        .collect();
    (out.stdout, files)
}

fn assert_deterministic(label: &str, args: Vec<String>, outputs: &[PathBuf]) {
    let paths: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let first = run_once(&args, &paths);
    for p in &paths {
        std::fs::remove_file(p).unwrap();
    }
    let second = run_once(&args, &paths);
    assert_eq!(first.0, second.0, "{label}: stdout differs between runs");
    for (k, (a, b)) in first.1.iter().zip(&second.1).enumerate() {
        assert!(a == b, "{label}: output file {k} differs between runs");
        assert!(!a.is_empty());
    }
}

fn s(path: &Path) -> String {
    path.to_str().unwrap().to_owned()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = s(&repo_path("scenarios/calibrated.toml"));
    let data = s(&repo_path("data/observations.csv"));

    let eq_csv = dir.path().join("eq.csv");
    assert_deterministic(
        "eq",
        vec![
            "eq".into(),
            "--scenario".into(),
            scenario.clone(),
            "--oracle".into(),
            "--out".into(),
            s(&eq_csv),
        ],
        &[eq_csv.clone()],
    );

    let lp = dir.path().join("fit.lp");
    let fragment = dir.path().join("fit.toml");
    assert_deterministic(
        "calibrate",
        vec![
            "calibrate".into(),
            "--data".into(),
            data,
            "--symmetric".into(),
            "--starts".into(),
            "8".into(),
            "--iters".into(),
            "120".into(),
            "--export-milp".into(),
            s(&lp),
            "--out".into(),
            s(&fragment),
        ],
        &[lp.clone(), fragment.clone()],
    );

    let curve = dir.path().join("curve.csv");
    assert_deterministic(
        "social",
        vec![
            "social".into(),
            "--scenario".into(),
            scenario.clone(),
            "--f1-step".into(),
            "0.25".into(),
            "--out".into(),
            s(&curve),
        ],
        &[curve.clone()],
    );

    let sweep = dir.path().join("sweep.csv");
    assert_deterministic(
        "sweep",
        vec![
            "sweep".into(),
            "--scenario".into(),
            scenario,
            "--alpha".into(),
            "0.25".into(),
            "--steps".into(),
            "21".into(),
            "--out".into(),
            s(&sweep),
        ],
        &[sweep.clone()],
    );

    println!("PASS determinism: eq, calibrate, social, sweep byte-identical across repeat runs");
}
