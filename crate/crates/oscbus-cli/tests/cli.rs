//! End-to-end tests of the `oscbus` binary: exit codes, JSON and CSV
//! outputs, config layering, and the resource guard.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn oscbus() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oscbus"))
}

fn run(args: &[&str]) -> Output {
    oscbus().args(args).output().expect("binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("output file exists");
    serde_json::from_str(&text).expect("output file is JSON")
}

#[test]
fn usage_errors_exit_with_code_two() {
    assert_eq!(code(&run(&["gate", "cnnot", "--controls", "0"])), 2);
    assert_eq!(code(&run(&["grover", "--qubits", "2", "--target", "4"])), 2);
    assert_eq!(code(&run(&["verify", "--cases", "0"])), 2);
    assert_eq!(code(&run(&["gate", "toffoli", "--bogus"])), 2);
    assert_eq!(code(&run(&["grover", "--target", "1"])), 2);
    assert_eq!(code(&run(&["gate", "rectangle", "--osc", "squeezed:2"])), 2);
}

#[test]
fn zero_impulse_rectangle_reports_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let result = run(&[
        "gate",
        "rectangle",
        "--l1",
        "0",
        "--l2",
        "1",
        "--cutoff",
        "16",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let report = read_json(&out);
    assert_eq!(report["pass"], Value::Bool(true));
    for (_, fidelity) in report["fidelities"].as_object().unwrap() {
        assert!((fidelity.as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn toffoli_thermal_report_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let result = run(&[
        "gate",
        "toffoli",
        "--K",
        "1",
        "--osc",
        "thermal:1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let report = read_json(&out);
    assert_eq!(report["pass"], Value::Bool(true));
    let fidelity = report["fidelities"]["thermal:1"].as_f64().unwrap();
    assert!(fidelity >= 1.0 - 1e-6, "fidelity {fidelity}");
}

#[test]
fn grover_auto_hits_the_reference_success_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let result = run(&[
        "grover",
        "--qubits",
        "3",
        "--target",
        "5",
        "--iterations",
        "auto",
        "--skip-report",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let summary = read_json(&out);
    assert_eq!(summary["iterations"], Value::from(2));
    let success = summary["success_probability"].as_f64().unwrap();
    assert!((success - 0.9453125).abs() < 1e-3, "success {success}");
}

#[test]
fn grover_zero_iterations_reports_the_uniform_probability() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let result = run(&[
        "grover",
        "--qubits",
        "3",
        "--target",
        "7",
        "--iterations",
        "0",
        "--skip-report",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let success = read_json(&out)["success_probability"].as_f64().unwrap();
    assert!((success - 0.125).abs() < 1e-6, "success {success}");
}

#[test]
fn grover_csv_lists_initial_and_per_round_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rounds.csv");
    let result = run(&[
        "grover",
        "--qubits",
        "2",
        "--target",
        "3",
        "--iterations",
        "1",
        "--skip-report",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,probability");
    assert_eq!(lines.len(), 3);
    let initial: f64 = lines[1].strip_prefix("0,").unwrap().parse().unwrap();
    assert!((initial - 0.25).abs() < 1e-6);
    let final_prob: f64 = lines[2].strip_prefix("1,").unwrap().parse().unwrap();
    assert!((final_prob - 1.0).abs() < 1e-6);
}

#[test]
fn ideal_mode_scales_to_wide_registers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let result = run(&[
        "grover",
        "--qubits",
        "8",
        "--target",
        "3",
        "--mode",
        "ideal",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let summary = read_json(&out);
    assert_eq!(summary["mode"], Value::from("Ideal"));
    assert!(summary["success_probability"].as_f64().unwrap() > 0.99);
}

#[test]
fn dimension_guard_exits_with_code_three() {
    let result = oscbus()
        .args(["gate", "toffoli", "--K", "1", "--cutoff", "49"])
        .env("OSCBUS_MAX_DIM", "64")
        .output()
        .unwrap();
    assert_eq!(code(&result), 3);

    let bad_env = oscbus()
        .args(["gate", "toffoli", "--K", "1"])
        .env("OSCBUS_MAX_DIM", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&bad_env), 2);
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let third = dir.path().join("third.json");
    for (path, seed) in [(&first, "5"), (&second, "5"), (&third, "6")] {
        let result = run(&[
            "verify",
            "--seed",
            seed,
            "--cases",
            "2",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&result), 0);
    }
    let first_bytes = std::fs::read(&first).unwrap();
    assert_eq!(first_bytes, std::fs::read(&second).unwrap());
    assert_ne!(first_bytes, std::fs::read(&third).unwrap());
}

#[test]
fn hopeless_verify_tolerance_exits_with_code_one() {
    let result = run(&[
        "verify",
        "--seed",
        "3",
        "--cases",
        "2",
        "--tolerance",
        "1e-18",
    ]);
    assert_eq!(code(&result), 1);
}

#[test]
fn trajectory_csv_traces_every_eigenvalue_tuple() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let result = run(&[
        "gate",
        "rectangle",
        "--cutoff",
        "16",
        "--osc",
        "fock:0",
        "--traj",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let text = std::fs::read_to_string(&traj).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eigen_tuple,step,x,p");
    let mut labels: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels, ["++", "+-", "-+", "--"]);
    // Four impulse legs per tuple: five vertices including the origin.
    assert_eq!(lines.len(), 1 + 4 * 5);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 4);
    }
}

#[test]
fn config_sweep_emits_an_array_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{ "qubits": 2, "iterations": 5, "sweep": [ { "target": 1 }, { "target": 2 } ] }"#,
    )
    .unwrap();
    let out = dir.path().join("runs.json");
    let result = run(&[
        "grover",
        "--iterations",
        "1",
        "--skip-report",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let runs = read_json(&out);
    let runs = runs.as_array().expect("sweep output is an array");
    assert_eq!(runs.len(), 2);
    for (run, target) in runs.iter().zip([1, 2]) {
        assert_eq!(run["x0"], Value::from(target));
        // One round on two qubits is exact; five rounds (the file value)
        // would land at 0.25, so this also proves the flag won.
        assert_eq!(run["iterations"], Value::from(1));
        assert!((run["success_probability"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{ "volume": 11 }"#).unwrap();
    let rejected = run(&["gate", "rectangle", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&rejected), 2);
}
