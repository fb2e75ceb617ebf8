//! End-to-end runs of the installed binary: exit codes, file outputs, and
//! determinism, exercised through a real process boundary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

fn scratch_dir(tag: &str) -> PathBuf {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let dir = std::env::temp_dir().join(format!(
        "acmzi-cli-{tag}-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acmzi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should launch")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// CSV text with the run-dependent timestamp line removed.
fn stable_csv(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|line| !line.starts_with("# timestamp_unix"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn no_arguments_is_a_usage_failure() {
    let dir = scratch_dir("noargs");
    let out = run_in(&dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("usage"), "stderr should carry usage text");
}

#[test]
fn help_prints_usage_and_succeeds() {
    let dir = scratch_dir("help");
    let out = run_in(&dir, &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    for word in ["sensitivity", "gain-sweep", "loss-map", "verify"] {
        assert!(text.contains(word), "usage text should mention {word}");
    }
}

#[test]
fn unknown_keys_and_bad_values_exit_with_code_one() {
    let dir = scratch_dir("badkey");
    let out = run_in(&dir, &["sensitivity", "--no_such_key", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no_such_key"));

    let out = run_in(&dir, &["sensitivity", "--phi_steps", "zero"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_in(&dir, &["loss-map", "--resolution", "4"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_in(&dir, &["gain-sweep", "--ratio_min", "0.5"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_in(&dir, &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sensitivity_writes_the_documented_csv_shape() {
    let dir = scratch_dir("shape");
    let out = run_in(&dir, &["sensitivity", "--phi_steps", "11", "--output", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = fs::read_to_string(dir.join("run.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# acmzi dataset"));
    let header = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .expect("header row");
    assert_eq!(header, "phi,delta_phi_hd,delta_phi_id,qcrb,sql,divergent");
    assert!(text.lines().any(|l| l.starts_with("# command = sensitivity")));
    assert!(text.lines().any(|l| l.starts_with("# units = ")));
    let data_rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data_rows.len(), 11);
    // Full float round-trip precision in every populated cell.
    let qcrb_cell = data_rows[0].split(',').nth(3).unwrap();
    let reparsed: f64 = qcrb_cell.parse().unwrap();
    assert!(qcrb_cell.len() >= 17, "cell {qcrb_cell} is too short to round-trip");
    assert!((reparsed - 1.0 / 9024.0_f64.sqrt()).abs() < 1e-16);
}

#[test]
fn repeated_runs_are_identical_apart_from_the_timestamp() {
    let first = scratch_dir("det-a");
    let second = scratch_dir("det-b");
    let args = ["sensitivity", "--phi_steps", "21", "--output", "run"];
    assert_eq!(run_in(&first, &args).status.code(), Some(0));
    assert_eq!(run_in(&second, &args).status.code(), Some(0));
    assert_eq!(
        stable_csv(&first.join("run.csv")),
        stable_csv(&second.join("run.csv"))
    );

    let args = ["verify", "--samples", "25", "--output", "checks"];
    let one = run_in(&first, &args);
    let two = run_in(&second, &args);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(two.status.code(), Some(0));
    assert_eq!(
        stable_csv(&first.join("checks.csv")),
        stable_csv(&second.join("checks.csv"))
    );
}

#[test]
fn a_zero_slope_point_is_marked_divergent_not_poisoned() {
    let dir = scratch_dir("dark");
    let out = run_in(
        &dir,
        &[
            "sensitivity",
            "--phi_min",
            "3.141592653589793",
            "--phi_max",
            "3.141592653589793",
            "--phi_steps",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.join("sensitivity.csv")).unwrap();
    let row = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert!(!cells[1].is_empty(), "homodyne stays live at the dark fringe");
    assert!(cells[2].is_empty(), "intensity cell should be empty, got {row}");
    assert_eq!(cells[5].parse::<f64>().unwrap(), 1.0);
    assert!(!text.to_lowercase().contains("nan"));
}

#[test]
fn an_entirely_dark_scan_exits_with_code_three() {
    let dir = scratch_dir("alldark");
    let out = run_in(&dir, &["loss-map", "--n_c", "0", "--resolution", "16"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn verification_failure_exits_with_code_two() {
    let dir = scratch_dir("crushed");
    let out = run_in(
        &dir,
        &["verify", "--samples", "10", "--tolerance_scale", "1e-13"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_of(&out).contains("FAILED"));

    let ok = run_in(&dir, &["verify", "--samples", "10"]);
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr_of(&ok));
    assert!(stdout_of(&ok).contains("verification passed"));
}

#[test]
fn config_files_load_under_later_flag_overrides() {
    let dir = scratch_dir("config");
    fs::write(
        dir.join("device.conf"),
        "# device under test\nn_c = 500   # pump photons\nbs_t = 0.3\nphi_steps = 5\n",
    )
    .unwrap();
    let out = run_in(
        &dir,
        &["sensitivity", "--config", "device.conf", "--phi_steps", "7"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = fs::read_to_string(dir.join("sensitivity.csv")).unwrap();
    assert!(text.contains("# n_c = 500"));
    assert!(text.contains("# bs_t = 0.3"));
    assert!(text.contains("# bs_r = 0.7"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 8);

    fs::write(dir.join("broken.conf"), "n_c = 500\nwat\n").unwrap();
    let out = run_in(&dir, &["sensitivity", "--config", "broken.conf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("line 2"));
}

#[test]
fn json_output_parses_and_keeps_divergent_cells_null() {
    let dir = scratch_dir("json");
    let out = run_in(
        &dir,
        &[
            "sensitivity",
            "--format",
            "json",
            "--phi_min",
            "3.141592653589793",
            "--phi_max",
            "3.141592653589793",
            "--phi_steps",
            "1",
            "--output",
            "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(value["metadata"]["command"], "sensitivity");
    assert!(value["columns"].as_array().unwrap().iter().any(|c| c == "phi"));
    assert!(value["data"]["delta_phi_id"][0].is_null());
    let hd = value["data"]["delta_phi_hd"][0].as_f64().unwrap();
    assert!((hd - 1.0 / 5000.0_f64.sqrt()).abs() < 1e-12);
}

#[test]
fn loss_map_writes_the_full_bundle() {
    let dir = scratch_dir("bundle");
    let out = run_in(
        &dir,
        &["loss-map", "--resolution", "16", "--output", "map", "--emit_plot", "true"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    for name in ["map.csv", "map_sql0.csv", "map_sql1.csv", "map_gain.csv", "map.plt"] {
        assert!(dir.join(name).is_file(), "{name} missing");
    }
    let grid = fs::read_to_string(dir.join("map.csv")).unwrap();
    assert!(grid.contains("# plane = internal"));
    assert!(grid.contains("# sql_level = "));
    let header = grid.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "eta_c,eta_d,delta_phi_fixed,delta_phi_optimized,divergent");
}

#[test]
fn gain_sweep_reports_the_balanced_reference_row() {
    let dir = scratch_dir("sweep");
    let out = run_in(
        &dir,
        &["gain-sweep", "--ratio_min", "1", "--ratio_max", "1.5", "--ratio_step", "0.25"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = fs::read_to_string(dir.join("gain_sweep.csv")).unwrap();
    let first = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    let cells: Vec<&str> = first.split(',').collect();
    let hd: f64 = cells[2].parse().unwrap();
    assert!((hd - 1.0 / 5000.0_f64.sqrt()).abs() < 1e-12);
    let phi_opt: f64 = cells[1].parse().unwrap();
    assert!((phi_opt - std::f64::consts::PI).abs() < 1e-4);
}
