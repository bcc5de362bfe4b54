use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mbfusion"));
    c.env("FUSE_THREADS", "2");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("scenario1.toml");
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--runs",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("scenario1.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "step,ospa_local_mean,ospa_fused_mean,card_mean,card_std,t_fuse_ms,N_H,N''_H"
    );
    assert_eq!(csv.lines().count(), 66);
    assert!(dir.path().join("scenario1_summary.txt").exists());
    assert!(dir.path().join("scenario1_oracle.csv").exists());
}

#[test]
fn same_seed_same_bytes() {
    let cfg = config("scenario1.toml");
    let outputs: Vec<String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let out = run(&[
                "run",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "7",
                "--runs",
                "3",
                "--out",
                dir.path().to_str().unwrap(),
            ]);
            assert!(out.status.success());
            fs::read_to_string(dir.path().join("scenario1.csv")).unwrap()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn wider_gate_gives_larger_clusters() {
    let cfg = config("scenario2.toml");
    let largest = |gamma: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--runs",
            "1",
            "--gamma",
            gamma,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let csv = fs::read_to_string(dir.path().join("scenario2.csv")).unwrap();
        column(&csv, "N''_H")
            .iter()
            .map(|v| v.parse::<f64>().unwrap())
            .sum::<f64>()
    };
    assert!(largest("1") < largest("4"));
}

#[test]
fn oversized_cluster_names_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("scenario2.toml"))
        .unwrap()
        .replace("fallback = true", "fallback = false");
    let cfg = dir.path().join("tight.toml");
    fs::write(&cfg, text).unwrap();
    let out = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--runs",
        "1",
        "--gamma",
        "60",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step"), "{err}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nsteps = 0\nruns = 1\nseed = 0\nregion = { x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0 }\n").unwrap();
    assert_eq!(
        run(&["run", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    fs::write(&bad, "name = \"x\"\nbogus = 1\n").unwrap();
    assert_eq!(
        run(&["run", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        run(&["run", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let out = bin()
        .env("FUSE_THREADS", "0")
        .args(["bound-check", "--instances", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_without_gate_agrees_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "compare-oracle",
        "--gamma",
        "inf",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("random_oracle_report.csv")).unwrap();
    let dr = column(&csv, "max_abs_dr");
    assert_eq!(dr.len(), 100);
    assert!(dr.iter().all(|v| v.parse::<f64>().unwrap() < 1e-12));
}

#[test]
fn oracle_on_scenario_is_covered_by_truncated_mass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("scenario1.toml");
    let out = run(&[
        "compare-oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("scenario1_oracle_report.csv")).unwrap();
    let dr = column(&csv, "max_abs_dr");
    let mass = column(&csv, "truncated_mass");
    for (a, b) in dr.iter().zip(&mass) {
        assert!(a.parse::<f64>().unwrap() <= b.parse::<f64>().unwrap() + 1e-12);
    }
}

#[test]
fn bench_counts_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bench-counts",
        "--max-objects",
        "8",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("bench_counts.csv")).unwrap();
    let row = |layout: &str| {
        csv.lines()
            .find(|l| l.starts_with(&format!("{layout},8,")))
            .unwrap()
            .split(',')
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    let sep = row("separated");
    assert_eq!(sep[5], "16");
    let ovl = row("overlapping");
    assert_eq!(ovl[4], ovl[5]);
    assert_eq!(ovl[6], "8x8");
}

#[test]
fn bound_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bound-check",
        "--instances",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("bound_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 200 * 8);
    assert!(column(&csv, "holds").iter().all(|v| v == "true"));
}
