//! End-to-end tests of the `qttn` binary: subcommands, flags, exit codes,
//! and the deterministic report products.

use std::path::Path;
use std::process::{Command, Output};

fn qttn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qttn"))
        .args(args)
        .current_dir(dir)
        .env_remove("TTN_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

const MINIMAL: &str = r#"{"n": 2, "chi": 8, "pattern": "DD", "g": 3.0, "seed": 7,
                          "backend": "reference", "label": "mini"}"#;

#[test]
fn run_appends_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", MINIMAL);
    let out = qttn(&["run", "--config", &cfg, "--out", "r.jsonl"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 1);
    assert!(records.contains("\"label\":\"mini\""));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mini: E = "));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"n": 2, "chi": 8, "pattern": "DD", "bond": 3}"#);
    let out = qttn(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bond"));
    let missing = qttn(&["run", "--config", "nope.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn ttn_threads_env_sets_default_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "env.json",
        r#"{"n": 2, "chi": 8, "pattern": "DD", "g": 3.0, "seed": 7}"#,
    );
    let out = Command::new(env!("CARGO_BIN_EXE_qttn"))
        .args(["run", "--config", &cfg, "--out", "r.jsonl"])
        .current_dir(dir.path())
        .env("TTN_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // the generated label echoes the resolved thread count
    let records = std::fs::read_to_string(dir.path().join("r.jsonl")).unwrap();
    assert!(records.contains("_t2"), "{records}");
}

#[test]
fn grid_runs_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "grid.json",
        r#"{"n": 2, "chi": [4, 8], "pattern": ["DD"], "backend": ["reference"],
            "g": 3.0, "seed": 7, "skip_ergt": [false, true]}"#,
    );
    let out = qttn(
        &["grid", "--config", &cfg, "--out", "g.jsonl", "--workers", "2"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = std::fs::read_to_string(dir.path().join("g.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 of 4 cells succeeded"));
}

#[test]
fn report_csv_is_byte_exact_on_synthetic_records() {
    let dir = tempfile::tempdir().unwrap();
    // synthetic records exercising the floor rule and the speedup formula
    let mk = |label: &str, energy: f64, time: f64| {
        format!(
            r#"{{"artifact_version":"0.1.0","label":"{label}","config":{{"n":2,"chi":8,"pattern":"DD"}},"sweeps":[],"total_wall_time_s":{time},"final_energy":{energy},"peak_memory_estimate_bytes":0}}"#
        )
    };
    let records = write(
        dir.path(),
        "synth.jsonl",
        &format!(
            "{}\n{}\n{}\n",
            mk("single", -10.0, 34.0),
            mk("parallel", -10.0, 1.0),
            mk("worse", -9.5, 2.0)
        ),
    );
    let out = qttn(
        &["report", &records, "--baseline", "single", "--epsilon", "1e-4", "--out", "t.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(
        csv,
        "label,energy_above_best,total_wall_time_s,speedup\n\
         single,0.0001,34,1\n\
         parallel,0.0001,1,34\n\
         worse,0.5,2,17\n"
    );
    let again = qttn(
        &["report", &records, "--baseline", "single", "--epsilon", "1e-4", "--out", "u.csv"],
        dir.path(),
    );
    assert!(again.status.success());
    assert_eq!(csv, std::fs::read_to_string(dir.path().join("u.csv")).unwrap());
    let plot = std::fs::read_to_string(dir.path().join("t.plot")).unwrap();
    assert!(plot.starts_with("# total_wall_time_s energy_above_best chi\n"));
    assert_eq!(plot.lines().count(), 4);

    let bad = qttn(&["report", &records, "--baseline", "nope"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_pass_and_tolerance_breach() {
    let dir = tempfile::tempdir().unwrap();
    let pass = write(
        dir.path(),
        "pass.json",
        r#"{"n": 2, "chi": 16, "pattern": "DDDDDD", "seed": 7, "backend": "reference",
            "verify_rtol": 1e-9}"#,
    );
    let out = qttn(&["verify", "--config", &pass], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("verify: PASS"), "{text}");
    assert!(text.contains("exact energy"));

    let fail = write(
        dir.path(),
        "fail.json",
        r#"{"n": 2, "chi": 2, "pattern": "DD", "seed": 7, "backend": "reference",
            "verify_rtol": 1e-13}"#,
    );
    let out = qttn(&["verify", "--config", &fail], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify: FAIL"));
}
