mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn coldsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coldsim")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.conf");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn runs_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), common::SMALL);
    let out = dir.path().join("out");
    let o = coldsim(&["--config", &conf, "--oracle", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("partial_gcs = "));
    for f in ["activity.csv", "cold_events.csv", "summary.csv", "convergence.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), common::SMALL);
    let o = coldsim(&["--config", &conf, "--strategy", "none", "--set", "duration_ms=3000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pins = 0\n"), "{text}");
    assert!(text.contains("final_time_ms = 3000\n"), "{text}");
}

#[test]
fn help_lists_configuration_keys() {
    let o = coldsim(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("t_cold_ms"));
    assert!(stdout(&o).contains("cold_dispersion"));
}

#[test]
fn config_errors_exit_1_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "seed = 3\nstrategy = turbo\n");
    let o = coldsim(&["--config", &conf]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = coldsim(&["--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = coldsim(&["--set", "p_max=0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = coldsim(&["--bogus-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_files_exit_3() {
    let o = coldsim(&["--config", "/nonexistent/scenario.conf"]);
    assert_eq!(o.status.code(), Some(3));
    let o = coldsim(&["--replay", "/nonexistent/run.trace"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), common::SMALL);
    let trace = dir.path().join("run.trace");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = coldsim(&[
        "--config",
        &conf,
        "--record",
        trace.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = coldsim(&[
        "--config",
        &conf,
        "--replay",
        trace.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["activity.csv", "cold_events.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let o = coldsim(&["--record", "x", "--replay", "y"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn broken_traces() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), common::SMALL);
    let trace = dir.path().join("cut.trace");
    fs::write(&trace, "coldtrace v1\nthreads 1 fanout 2 duration 5\n0 push 0 1\n").unwrap();
    let o = coldsim(&["--config", &conf, "--replay", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trace parse error"), "{}", stderr(&o));

    fs::write(&trace, "coldtrace v1\nthreads 1 fanout 2 duration 5\n0 pop 0\nend 1\n").unwrap();
    let o = coldsim(&["--config", &conf, "--replay", trace.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
