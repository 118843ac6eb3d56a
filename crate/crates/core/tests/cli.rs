use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dalc::config::DEFAULT_SCENARIO;

fn dalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dalc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn last_stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr)
        .lines()
        .last()
        .unwrap_or_default()
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn short_scenario() -> String {
    DEFAULT_SCENARIO
        .replace("duration = 30.0", "duration = 1.0")
        .replace(
            "average_window = [20.0, 30.0]",
            "average_window = [0.5, 1.0]",
        )
}

#[test]
fn check_accepts_the_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "default.toml", DEFAULT_SCENARIO);
    let out = dalc(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: followers=5"));
}

#[test]
fn check_names_the_spanning_tree_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let broken: String = DEFAULT_SCENARIO
        .lines()
        .filter(|l| !l.contains("to = 3,"))
        .collect::<Vec<_>>()
        .join("\n");
    let cfg = write(dir.path(), "broken.toml", &broken);
    let out = dalc(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let line = last_stderr_line(&out);
    assert!(line.starts_with("error: kind=validation exit=2"), "{line}");
    assert!(line.contains("Assumption 2"), "{line}");
}

#[test]
fn check_rejects_negative_gain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.toml",
        &DEFAULT_SCENARIO.replace("gain = 10.0", "gain = -1.0"),
    );
    let out = dalc(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(last_stderr_line(&out).contains("gain positivity"));
}

#[test]
fn check_reports_parse_errors_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "typo.toml",
        &DEFAULT_SCENARIO.replace("beta2 = 1.0", "beta2 = 1.0\nbeta3 = 2.0"),
    );
    let out = dalc(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let line = last_stderr_line(&out);
    assert!(line.starts_with("error: kind=parse exit=2"), "{line}");
    assert!(line.contains("line"), "{line}");
}

#[test]
fn usage_errors_exit_one() {
    let out = dalc(&["simulate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(last_stderr_line(&out).starts_with("error: kind=usage exit=1"));
}

#[test]
fn missing_files_exit_four() {
    let out = dalc(&["check", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn numerical_abort_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cap.toml",
        &short_scenario().replace("torque_cap = 500.0", "torque_cap = 1.0"),
    );
    let out = dalc(&[
        "simulate",
        &cfg,
        "--out",
        &dir.path().join("r").to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(last_stderr_line(&out).contains("kind=torque_cap_exceeded"));
}

#[test]
fn simulate_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.toml", &short_scenario());
    let r1 = dir.path().join("r1");
    let r2 = dir.path().join("r2");

    let out = dalc(&["simulate", &cfg, "--out", &r1.to_string_lossy()]);
    assert_eq!(out.status.code(), Some(0), "{}", last_stderr_line(&out));
    for f in [
        "agent_1.csv",
        "agent_5.csv",
        "network.csv",
        "weights.json",
        "summary.json",
    ] {
        assert!(r1.join(f).is_file(), "{f}");
    }
    let rows = fs::read_to_string(r1.join("agent_3.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 101);

    let weights = r1.join("weights.json");
    let out = dalc(&[
        "replay",
        &cfg,
        "--weights",
        &weights.to_string_lossy(),
        "--out",
        &r2.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", last_stderr_line(&out));
    assert!(r2.join("summary.json").is_file());
    assert!(!r2.join("weights.json").exists());
}

#[test]
fn replay_rejects_a_foreign_lattice_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.toml", &short_scenario());
    let r1 = dir.path().join("r1");
    assert_eq!(
        dalc(&["simulate", &cfg, "--out", &r1.to_string_lossy()])
            .status
            .code(),
        Some(0)
    );

    let other = write(
        dir.path(),
        "wide.toml",
        &short_scenario().replace("width = 0.8", "width = 0.9"),
    );
    let r2 = dir.path().join("r2");
    let out = dalc(&[
        "replay",
        &other,
        "--weights",
        &r1.join("weights.json").to_string_lossy(),
        "--out",
        &r2.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(last_stderr_line(&out).contains("weights lattice mismatch"));
    assert!(!r2.exists());
}

#[test]
fn verify_passes() {
    let out = dalc(&["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
