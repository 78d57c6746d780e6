use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn treedyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treedyn"))
        .args(args)
        .env_remove("TREEDYN_VOTER_MAX_DEPTH")
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = treedyn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    treedyn(args).status.code().unwrap()
}

fn column(csv: &str, row: usize, name: &str) -> f64 {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.nth(row).unwrap().split(',').nth(i).unwrap().parse().unwrap()
}

#[test]
fn one_layer_estimate_near_exponential_law() {
    let csv = stdout(&["simulate", "coalescing", "--n", "1", "--T", "1", "--samples", "100000", "--seed", "7"]);
    let est = column(&csv, 0, "estimate");
    assert!((est - 0.6321).abs() < 0.005, "{est}");
    assert!(column(&csv, 0, "ci_low") < est && est < column(&csv, 0, "ci_high"));
}

#[test]
fn closed_form_at_zero_is_zero() {
    let csv = stdout(&["analytic", "closed-form", "--T", "0"]);
    assert_eq!(csv, "T,value\n0.0,0.0\n");
}

#[test]
fn rate_sum_example() {
    let csv = stdout(&["ising", "rate-sum", "--beta", "2", "--schedule", "ksq", "--tol", "1e-6"]);
    assert!((column(&csv, 0, "sum") - 0.018353).abs() < 1e-6);
}

#[test]
fn exit_codes_by_category() {
    assert_eq!(code(&["verify", "quick"]), 2);
    assert_eq!(code(&["simulate", "coalescing", "--n", "1"]), 2, "missing seed");
    assert_eq!(code(&["simulate", "lattice-demo", "--seed", "1", "--T", "2.5"]), 2);
    assert_eq!(code(&["ising", "rate-sum", "--schedule", "power:1:1"]), 2);
    assert_eq!(code(&["simulate", "coalescing", "--n", "40", "--seed", "1"]), 3);
    assert_eq!(code(&["simulate", "voter", "--n", "20", "--seed", "1"]), 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "T,value\n0,0\n0.5,1.5\n1.0,2\n").unwrap();
    assert_eq!(code(&["analytic", "residual", "--input", bad.to_str().unwrap()]), 4);
    let missing = dir.path().join("none.toml");
    assert_eq!(code(&["--config", missing.to_str().unwrap(), "analytic", "ode"]), 1);
}

#[test]
fn config_file_outranks_environment_guards() {
    let out = Command::new(env!("CARGO_BIN_EXE_treedyn"))
        .args(["simulate", "voter", "--n", "3", "--samples", "10", "--seed", "1"])
        .env("TREEDYN_VOTER_MAX_DEPTH", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("g.toml");
    std::fs::write(&cfg, "[guards]\nvoter_max_depth = 5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_treedyn"))
        .args(["--config", cfg.to_str().unwrap(), "simulate", "voter", "--n", "3", "--samples", "10", "--seed", "1"])
        .env("TREEDYN_VOTER_MAX_DEPTH", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "config file outranks the environment");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[model]\nwidth = 3\n").unwrap();
    assert_eq!(code(&["--config", cfg.to_str().unwrap(), "analytic", "ode"]), 2);
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn reports_reproduce_from_their_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[model]\nn = 2\nT = [0.5, 1.0, 2.0]\n\n[sampling]\nseed = 13\nsamples = 3000\n",
    )
    .unwrap();
    stdout(&["--config", cfg.to_str().unwrap(), "--out-dir", a.to_str().unwrap(), "simulate", "voter"]);
    let report: Value = serde_json::from_slice(&read(&a, "simulate-voter.json")).unwrap();
    assert_eq!(report["tool"], "treedyn");
    assert_eq!(report["seed"], 13);
    assert_eq!(report["config"]["model"]["n"], 2);
    assert!(report["guards"]["voter_max_depth"].is_u64());
    let timing: Value = serde_json::from_slice(&read(&a, "simulate-voter.timing.json")).unwrap();
    assert!(timing["wall_clock_seconds"].as_f64().unwrap() >= 0.0);

    let json = a.join("simulate-voter.json");
    stdout(&["--config", json.to_str().unwrap(), "--out-dir", b.to_str().unwrap(), "--workers", "3", "simulate", "voter"]);
    assert_eq!(read(&a, "simulate-voter.json"), read(&b, "simulate-voter.json"));
    assert_eq!(read(&a, "simulate-voter.csv"), read(&b, "simulate-voter.csv"));
}

#[test]
fn output_is_independent_of_worker_count() {
    let run = |w: &str| stdout(&["--workers", w, "simulate", "coalescing", "--n", "5", "--T", "0.5,1,3", "--samples", "4000", "--seed", "2"]);
    assert_eq!(run("1"), run("8"));
    let inf = |w: &str| stdout(&["--workers", w, "--format", "json", "ising", "infection", "--replicas", "6", "--seed", "4"]);
    assert_eq!(inf("1"), inf("5"));
}

#[test]
fn csv_lines_end_with_lf_and_floats_round_trip() {
    let csv = stdout(&["analytic", "ode", "--model", "voter", "--t-max", "2"]);
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 202);
    for line in csv.lines().skip(1) {
        for cell in line.split(',') {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:?}"), cell);
        }
    }
}

#[test]
fn residual_reads_a_plain_curve() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("closed.csv");
    std::fs::write(&plain, stdout(&["analytic", "closed-form"])).unwrap();
    let out = stdout(&["--format", "json", "analytic", "residual", "--input", plain.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["summary"]["fixed_point_residual"].as_f64().unwrap() < 5e-3);
    assert!(v["summary"]["ode_residual"].as_f64().unwrap() < 1e-4);
}

#[test]
fn iterate_table_is_wide() {
    let csv = stdout(&["analytic", "iterate", "--n", "3", "--t-max", "1"]);
    assert_eq!(csv.lines().next().unwrap(), "T,iterate_1,iterate_2,iterate_3");
    let last = csv.lines().last().unwrap();
    let v: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert!((v[1] - 0.554605839516948).abs() < 1e-6);
    assert!(v[1] >= v[2] && v[2] >= v[3]);
}

#[test]
fn coupled_layers_and_lattice_demo() {
    let csv = stdout(&["ising", "coupled", "--seed", "3", "--depth", "5", "--T", "20", "--replicas", "2"]);
    assert_eq!(csv.lines().count(), 6);
    let demo = stdout(&["simulate", "lattice-demo", "--seed", "1", "--side", "8", "--T", "10"]);
    assert_eq!(demo.lines().count(), 12);
    assert_eq!(column(&demo, 0, "density"), 1.0);
}
