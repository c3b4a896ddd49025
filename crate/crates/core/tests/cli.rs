//! Black-box tests of the command-line binary: exit codes, CSV shape, and
//! determinism across reruns.

use std::process::{Command, Output};

fn uavbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavbeam")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sweep_rho_row_count_and_determinism() {
    let args = [
        "sweep-rho",
        "--seed",
        "7",
        "--realizations",
        "3",
        "--schemes",
        "proposed,zf",
    ];
    let first = uavbeam(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = stdout(&first);
    let lines: Vec<&str> = csv.lines().collect();
    // Header plus schemes x rho-points x realizations data rows.
    assert_eq!(lines.len(), 1 + 2 * 3 * 3);
    assert!(lines[0].starts_with("scheme,sweep,sweep_value,realization,status"));

    let second = uavbeam(&args);
    assert_eq!(first.stdout, second.stdout, "CSV must be byte-identical across reruns");
}

#[test]
fn sweep_writes_summary_next_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("radius.csv");
    let out = uavbeam(&[
        "sweep-radius",
        "--seed",
        "3",
        "--realizations",
        "2",
        "--schemes",
        "proposed",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let summary = std::fs::read_to_string(dir.path().join("radius.summary.csv")).unwrap();
    assert!(summary.lines().count() >= 1 + 3);
}

#[test]
fn solve_matches_closed_form_power() {
    // One user with no uncertainty: the optimizer hovers overhead, so the
    // power equals the matched-filter closed form wherever the user lands.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("single.toml");
    std::fs::write(
        &cfg,
        "seed = 11\nk_users = 1\nn_antennas = 4\nrho = [0.0]\nlocation_radius = 0.0\nsinr_req_db = [10.0]\ngamma_margin_db = 0.0\n",
    )
    .unwrap();
    let out = uavbeam(&["solve", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let watts: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("total power: "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((watts / 2.5301e-6 - 1.0).abs() < 1e-3, "got {watts} W:\n{text}");
}

#[test]
fn verify_runs_all_suites() {
    let out = uavbeam(&["verify", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn dump_problem_emits_serialization() {
    let out = uavbeam(&["dump-problem", "--seed", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("problem-dump v1"), "{}", &text[..text.len().min(80)]);
    assert!(text.contains("block"));
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "realizations = \"many\"\n").unwrap();
    let out = uavbeam(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    std::fs::write(&cfg, "not_a_field = 3\n").unwrap();
    let out = uavbeam(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = uavbeam(&["sweep-rho", "--schemes", "bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let out = uavbeam(&["solve", "--oracle-grid", "101by64"]);
    assert_eq!(out.status.code(), Some(1));

    let out = uavbeam(&["solve", "--config", "/nonexistent/path.toml"]);
    assert_eq!(out.status.code(), Some(1));
}
