//! End-to-end checks of the `fishnet` binary: file formats, determinism,
//! exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fishnet"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fishnet-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"))
}

#[test]
fn p1_table_format() {
    let dir = temp_dir("p1");
    let status = bin()
        .args(["p1-table", "--xmin", "0", "--xmax", "2", "--step", "0.5"])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let table = read(&dir.join("p1_table.csv"));
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("x,P1(x)"));
    assert_eq!(lines.next(), Some("0,0"));
    assert_eq!(table.lines().count(), 6);
    assert!(dir.join("manifest.json").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn simulate_is_deterministic_and_emits_snapshots() {
    let dir_a = temp_dir("sim-a");
    let dir_b = temp_dir("sim-b");
    for dir in [&dir_a, &dir_b] {
        let status = bin()
            .args([
                "simulate", "--rows", "4", "--gaps", "4", "--kt-ratio", "0.2", "--jumps", "10",
                "--seed", "3",
            ])
            .arg("--out")
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in [
        "events.csv",
        "record.json",
        "snapshot_prepeak.json",
        "snapshot_peak.json",
        "snapshot_postpeak.json",
        "snapshot_final.json",
    ] {
        assert_eq!(
            read(&dir_a.join(file)),
            read(&dir_b.join(file)),
            "{file} differs between identical runs"
        );
    }
    let events = read(&dir_a.join("events.csv"));
    assert_eq!(events.lines().next(), Some("event,k,sigmaN,link,localized"));
    fs::remove_dir_all(&dir_a).unwrap();
    fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn simulate_brittle_limit_completes() {
    let dir = temp_dir("sim-brittle");
    let status = bin()
        .args([
            "simulate", "--rows", "4", "--gaps", "4", "--kt-ratio", "0.5", "--jumps", "1",
            "--seed", "9",
        ])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn campaign_outputs_and_thread_invariance() {
    let dir_a = temp_dir("camp-1");
    let dir_b = temp_dir("camp-2");
    for (dir, threads) in [(&dir_a, "1"), (&dir_b, "2")] {
        let status = bin()
            .args([
                "campaign", "--rows", "4", "--gaps", "4", "--kt-ratio", "0.2", "--jumps", "10",
                "--replicas", "40", "--seed", "11", "--threads", threads, "--event-logs", "2",
            ])
            .arg("--out")
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in [
        "sigma_max.csv",
        "nc_hist.csv",
        "ratio_trace.csv",
        "ecdf_weibull.csv",
        "replica_0_events.csv",
        "replica_1_events.csv",
    ] {
        assert_eq!(
            read(&dir_a.join(file)),
            read(&dir_b.join(file)),
            "{file} differs across worker counts"
        );
    }
    let header = read(&dir_a.join("ecdf_weibull.csv"));
    assert_eq!(header.lines().next(), Some("x,p,weibull_x,weibull_y"));
    fs::remove_dir_all(&dir_a).unwrap();
    fs::remove_dir_all(&dir_b).unwrap();
}

#[test]
fn fit_nc_round_trip() {
    let dir = temp_dir("fit");
    let input = dir.join("nc.csv");
    // Counts with mean 4 and sample variance 12 would be ideal; use a
    // simple over-dispersed sample and check the pipeline plumbing.
    fs::write(&input, "n_c\n1\n2\n2\n5\n9\n11\n").unwrap();
    let output = bin()
        .arg("fit-nc")
        .arg("--input")
        .arg(&input)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    let fit: serde_json::Value = serde_json::from_str(&read(&dir.join("fit.json"))).unwrap();
    assert_eq!(fit["sample_size"], 6);
    assert!(fit["lambda"].as_f64().unwrap() > 0.0);
    let pmf = read(&dir.join("nc_pmf.csv"));
    assert_eq!(pmf.lines().next(), Some("k,count,empirical_p,fitted_p"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn predict_emits_curve() {
    let dir = temp_dir("predict");
    let status = bin()
        .args([
            "predict", "--lambda", "5", "--theta", "0.5", "--k0", "5", "--dk", "2", "--gamma",
            "rational", "--xmin", "4", "--xmax", "10", "--points", "13",
        ])
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let curve = read(&dir.join("predict.csv"));
    assert_eq!(curve.lines().next(), Some("x,Pf,weibull_x,weibull_y"));
    assert_eq!(curve.lines().count(), 14);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes() {
    // Unknown flag: clap usage error, exit 2.
    let status = bin().args(["p1-table", "--bogus"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));

    // Invalid model parameters: usage error from validation, exit 2.
    let status = bin()
        .args(["predict", "--lambda", "5", "--theta", "1.5"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    // Shift above truncation violates the model constraint.
    let status = bin()
        .args(["predict", "--lambda", "5", "--theta", "0.5", "--k0", "2", "--dk", "3"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    // Missing input file: I/O failure, exit 1.
    let status = bin()
        .args(["fit-nc", "--input", "/nonexistent/nc.csv"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
}

#[test]
fn pipeline_end_to_end_small() {
    let dir = temp_dir("pipeline");
    let output = bin()
        .args([
            "pipeline", "--rows", "4", "--gaps", "4", "--kt-ratio", "0.2", "--jumps", "10",
            "--replicas", "150", "--seed", "21", "--threads", "2",
        ])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.join("summary.json"))).unwrap();
    assert_eq!(summary["replicas"], 150);
    // kt-ratio 0.2 picks the (5, 2) reference pair.
    assert_eq!(summary["k0"], 5);
    assert_eq!(summary["dk"], 2);
    assert!(summary["strength_at_1e6"].as_f64().unwrap() > 0.0);
    let comparison = read(&dir.join("comparison.csv"));
    assert_eq!(
        comparison.lines().next(),
        Some("x,empirical_p,weibull_y_empirical,analytic_p,weibull_y_analytic")
    );
    assert_eq!(comparison.lines().count(), 151);
    fs::remove_dir_all(&dir).unwrap();
}
