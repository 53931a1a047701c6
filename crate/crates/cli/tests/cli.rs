//! End-to-end checks of the `cdpr` binary: output formats, exit codes and
//! run determinism, all through `std::process::Command`.

use std::path::Path;
use std::process::{Command, Output};

use cdpr_core::model::Vec2;
use cdpr_core::trajectory::{plan_square, save_plan};
use tempfile::TempDir;

fn cdpr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdpr"))
        .args(args)
        .env_remove("CDPR_SEED")
        .output()
        .expect("spawn cdpr")
}

fn cdpr_seeded(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdpr"))
        .args(args)
        .env("CDPR_SEED", seed)
        .output()
        .expect("spawn cdpr")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn ik_prints_six_significant_digits() {
    let out = cdpr(&["ik", "--x", "750", "--y", "750"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "l1=975.807 l2=975.807");
}

#[test]
fn fk_inverts_ik_and_rejects_impossible_lengths() {
    let out = cdpr(&["fk", "--l1", "975.8073580374356", "--l2", "975.8073580374356"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "x=750 y=750");

    let out = cdpr(&["fk", "--l1", "1", "--l2", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no solution"));
}

#[test]
fn tensions_reports_feasibility_in_the_exit_code() {
    let out = cdpr(&["tensions", "--x", "750", "--y", "750"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "t1=6.93672 t2=6.93672");

    let out = cdpr(&["tensions", "--x", "750", "--y", "1435"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn workspace_writes_the_map_and_counts_cells() {
    let dir = TempDir::new().unwrap();
    let map = dir.path().join("map.csv");
    let out = cdpr(&[
        "workspace",
        "--x-min", "700", "--x-max", "800",
        "--y-min", "700", "--y-max", "800",
        "--spacing", "50",
        "--out", map.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("9 of 9 cells feasible"));
    let text = std::fs::read_to_string(&map).unwrap();
    assert_eq!(text.lines().count(), 10); // header + 9 cells

    let out = cdpr(&["workspace", "--spacing=-1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_flags_are_usage_errors() {
    let out = cdpr(&["ik", "--x", "1", "--y", "1", "--frobnicate"]);
    assert_eq!(code(&out), 1);
    let out = cdpr(&["--help"]);
    assert_eq!(code(&out), 0);
}

fn run_args<'a>(log: &'a Path, speed: &'a str, side: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["run-loop", "--speed", speed, "--side", side, "--log"];
    v.push(log.to_str().unwrap());
    v.extend_from_slice(extra);
    v
}

#[test]
fn run_loop_is_deterministic_and_honours_cdpr_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (
        dir.path().join("a.csv"),
        dir.path().join("b.csv"),
        dir.path().join("c.csv"),
    );
    let gw = ["--gateway-delay", "30", "--gateway-jitter", "5"];
    assert_eq!(code(&cdpr_seeded(&run_args(&a, "1000", "50", &gw), "7")), 0);
    assert_eq!(code(&cdpr_seeded(&run_args(&b, "1000", "50", &gw), "7")), 0);
    assert_eq!(code(&cdpr_seeded(&run_args(&c, "1000", "50", &gw), "9")), 0);
    let (a, b, c) = (
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        std::fs::read(&c).unwrap(),
    );
    assert_eq!(a, b, "same seed must reproduce the log byte for byte");
    assert_ne!(a, c, "a different seed must change the gateway jitter");
}

#[test]
fn run_loop_direct_ideal_tracks_within_a_cycle() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("ideal.csv");
    let out = cdpr(&run_args(&log, "1000", "50", &["--direct", "--plant-mode", "ideal"]));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("cycles over"));
    assert!(log.exists());
}

#[test]
fn manifest_runs_the_described_experiment() {
    let dir = TempDir::new().unwrap();
    let plan_path = dir.path().join("plan.json");
    let plan = plan_square(Vec2::new(750.0, 850.0), 50.0, 1000.0, 2000.0).unwrap();
    save_plan(&plan, &plan_path).unwrap();
    let out_dir = dir.path().join("out");
    let manifest = dir.path().join("run.json");
    std::fs::write(
        &manifest,
        format!(
            r#"{{
  "plan": {plan:?},
  "gateway": {{ "delay_ms": 30.0, "jitter_ms": 5.0 }},
  "seed": 7,
  "out_dir": {out:?}
}}"#,
            plan = plan_path.to_str().unwrap(),
            out = out_dir.to_str().unwrap(),
        ),
    )
    .unwrap();
    let out = cdpr(&["run-loop", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("loop.csv").exists());

    // a manifest naming a missing plan file is an error, exit 1
    std::fs::remove_file(&plan_path).unwrap();
    let out = cdpr(&["run-loop", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn analyze_emits_reports_for_one_or_two_logs() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let gw = ["--gateway-delay", "30", "--gateway-jitter", "5"];
    assert_eq!(code(&cdpr_seeded(&run_args(&a, "300", "100", &gw), "7")), 0);
    assert_eq!(code(&cdpr(&run_args(&b, "300", "100", &["--direct"]))), 0);

    let an = dir.path().join("an");
    let out = cdpr(&[
        "analyze",
        "--log-a", a.to_str().unwrap(),
        "--log-b", b.to_str().unwrap(),
        "--speed", "300", "--side", "100",
        "--out-dir", an.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("Axis time delay — a"));
    assert!(text.contains("Position error — a vs b"));
    for f in ["delays.csv", "errors.csv", "report.txt", "series_a.csv", "series_b.csv"] {
        assert!(an.join(f).exists(), "missing {f}");
    }
    let errors = std::fs::read_to_string(an.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 3); // header + upper + lower
    assert_eq!(
        errors.lines().next().unwrap().split(',').count(),
        8 // segment label + 7 numeric columns
    );

    // one log, no plan info: delay report only
    let single = dir.path().join("single");
    let out = cdpr(&[
        "analyze",
        "--log-a", a.to_str().unwrap(),
        "--out-dir", single.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(single.join("delays.csv").exists());
    assert!(!single.join("errors.csv").exists());
}

#[test]
fn preset_writes_logs_and_reports() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("tables");
    let out = cdpr_seeded(
        &[
            "run-loop",
            "--preset", "paper-table-1-2",
            "--out-dir", out_dir.to_str().unwrap(),
        ],
        "42",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "remote-100.csv", "local-100.csv", "remote-1000.csv", "local-1000.csv",
        "delays.csv", "errors.csv", "report.txt",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    // four runs × two axes
    let delays = std::fs::read_to_string(out_dir.join("delays.csv")).unwrap();
    assert_eq!(delays.lines().count(), 9);
    let text = stdout(&out);
    assert!(text.contains("remote-100"));
    assert!(text.contains("Position error — remote-1000 vs local-1000"));
}
