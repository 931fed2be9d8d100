use std::fs;
use std::process::{Command, Output};

use chiral_battery::table::ResultTable;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiral-qb"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

#[test]
fn steady_to_stdout_parses() {
    let o = run(&["steady"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = ResultTable::read_csv(o.stdout.as_slice()).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.preamble.iter().any(|l| l == "generated_unix 1700000000"));
    let e_b = t.column("E_B").unwrap()[0];
    assert!((e_b - 43.148896293211).abs() < 1e-9, "{e_b}");
}

#[test]
fn output_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"gamma_R": 0.5, "D": 0.5, "kappa": 0.05, "drive_amp": 0.1, "nbar": 0.2,
                        "evolve": {"t_end": 20, "n_samples": 11}}"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let o = run(&["--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap(), "evolve"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let t = ResultTable::read_csv(text.as_bytes()).unwrap();
    assert_eq!(t.rows.len(), 11);
    assert_eq!(t.to_csv_string().unwrap(), text);
}

#[test]
fn sweep_threads_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"gamma_R": 0.0012345679012345679, "D": 1, "kappa": 6.17283950617284e-5,
                        "drive_amp": 0.0022222222222222222,
                        "sweep": {"var": "phase", "start": 0, "stop": 3.141592653589793, "count": 9}}"#,
    )
    .unwrap();
    let one = run(&["--config", cfg.to_str().unwrap(), "--jobs", "1", "sweep"]);
    let four = run(&["--config", cfg.to_str().unwrap(), "--jobs", "4", "sweep"]);
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(stdout(&one), stdout(&four));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"gamma_R": 0.5, "drive_amp": 0.1, "nbar": -1}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "steady"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("validation error"));

    let o = run(&["--config", dir.path().join("missing.json").to_str().unwrap(), "steady"]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["figure", "fig9"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_reports_and_signals_failure() {
    let ok = run(&["verify", "--draws", "3"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).lines().any(|l| l.starts_with("PASS oracle_vs_ode")));

    let bad = run(&["verify", "--draws", "1", "--mutate-hl-phase"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stdout(&bad).lines().any(|l| l.starts_with("FAIL oracle_vs_ode")));
}

#[test]
fn figure_tables_are_emitted() {
    let o = run(&["figure", "fig2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = ResultTable::read_csv(o.stdout.as_slice()).unwrap();
    let d = t.column("D").unwrap();
    let e_b = t.column("E_B").unwrap();
    let last = d.iter().rposition(|&v| v == 1.0).unwrap();
    assert!((e_b[last] - 43.1).abs() < 0.1, "{}", e_b[last]);
}
