//! End-to-end checks of the binary: output formats and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpsverify"))
        .args(args)
        .env_remove("CPSVERIFY_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn chi_of_magic_state() {
    let out = run(&["chi", "T"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("chi(X)=0.353553"), "{text}");
    assert!(text.contains("chi(Y)=0.353553"), "{text}");
    assert!(text.contains("w=0.707107"), "{text}");
}

#[test]
fn chi_accepts_multiword_specs() {
    let out = run(&["chi", "bloch", "0", "0", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("chi(Z)=0.500000"));
    let out = run(&["chi", "frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn backprop_prints_conjugated_pauli() {
    let cfg = fixture("config.json");
    let out = run(&["backprop", cfg.to_str().unwrap(), "0", "Z"]);
    assert!(out.status.success());
    // C Z_0 C^ for C = CNOT(0,1) H(0) is X tensor X
    assert_eq!(stdout(&out).trim(), "XX");
}

#[test]
fn sample_size_reports_both_budgets() {
    let cfg = fixture("config.json");
    let out = run(&["sample-size", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("N_iid=874"), "{text}");
    assert!(text.contains("N_noniid="), "{text}");
}

#[test]
fn certify_exit_codes_follow_verdict() {
    let good = run(&["certify", fixture("config.json").to_str().unwrap()]);
    assert_eq!(good.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&good)).unwrap();
    assert_eq!(v["accepted"], true);
    assert!(v["witness"].as_f64().unwrap() > 0.9);

    let bad = run(&["certify", fixture("bad_prover.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&bad)).unwrap();
    assert_eq!(v["accepted"], false);
}

#[test]
fn certify_is_reproducible_and_seed_sensitive() {
    let cfg = fixture("config.json");
    let a = stdout(&run(&["certify", cfg.to_str().unwrap(), "--seed", "77"]));
    let b = stdout(&run(&["certify", cfg.to_str().unwrap(), "--seed", "77"]));
    let c = stdout(&run(&["certify", cfg.to_str().unwrap(), "--seed", "78"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn env_seed_fallback() {
    let cfg = fixture("config.json");
    let with_env = Command::new(env!("CARGO_BIN_EXE_cpsverify"))
        .args(["certify", cfg.to_str().unwrap()])
        .env("CPSVERIFY_SEED", "77")
        .output()
        .unwrap();
    let with_flag = run(&["certify", cfg.to_str().unwrap(), "--seed", "77"]);
    assert_eq!(with_env.stdout, with_flag.stdout);
}

#[test]
fn verify_runs_protocol_two() {
    let cfg = fixture("config.json");
    let out = run(&["verify", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cert"]["accepted"], true);
    assert!(v["n1"].as_u64().unwrap() > v["n2"].as_u64().unwrap());
}

#[test]
fn sweep_emits_csv_with_degrading_acceptance() {
    let cfg = fixture("config.json");
    let out = run(&["sweep", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "param,trials,N_per_trial,mean_W,stderr_W,accept_rate");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let mean_w: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(mean_w[0] > mean_w[1] && mean_w[1] > mean_w[2], "{text}");
}

#[test]
fn msi_compile_then_run_roundtrip() {
    let dir = std::env::temp_dir().join(format!("cpsverify-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let prog = dir.join("prog.json");
    let circ = fixture("clifford_t.txt");
    let out = run(&[
        "msi",
        "compile",
        circ.to_str().unwrap(),
        "--out",
        prog.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&prog).unwrap()).unwrap();
    assert_eq!(doc["data_qubits"], 2);
    assert_eq!(doc["t_count"], 1);

    let out = run(&["msi", "run", prog.to_str().unwrap(), "--shots", "500", "--seed", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("bits,count,frequency"), "{text}");
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 500);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("pass")), "{text}");
}

#[test]
fn missing_file_is_an_error() {
    let out = run(&["certify", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}
