//! Command-line contract: flags, exit codes, output formats, reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use mimo_adhoc::randmat::largest_gain_cdf;
use mimo_adhoc_cli::table::parse_rendered;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimo-adhoc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &[&str] = &["--trials", "300", "--set", "grid_points=50", "--set", "lambda=exact"];

fn with(extra: &[&str]) -> Vec<String> {
    extra.iter().chain(SMALL).map(|s| s.to_string()).collect()
}

fn run(args: &[String]) -> Output {
    bin(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn success_and_shape() {
    let o = run(&with(&["sinr-cdf", "--set", "k=0,2"]));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let tables = parse_rendered(&stdout(&o)).unwrap();
    assert_eq!(tables.len(), 1);
    let t = &tables[0];
    assert_eq!(t.columns, ["K", "sinr", "cdf_analytic", "cdf_empirical"]);
    assert_eq!(t.rows.len(), 100);
    assert_eq!(t.metadata["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(t.metadata["seed"], "1");
    assert_eq!(t.metadata["command"], "sinr-cdf");
}

#[test]
fn interference_free_cdf_is_exact() {
    let o = run(&with(&["sinr-cdf", "--set", "k=0"]));
    let t = &parse_rendered(&stdout(&o)).unwrap()[0];
    for row in &t.rows {
        let expected = largest_gain_cdf(4, row[1] / 100.0);
        assert!((row[2] - expected).abs() < 1e-14);
    }
}

#[test]
fn csv_and_json_carry_identical_numbers() {
    let csv = run(&with(&["moments", "--set", "k=0,2,5"]));
    let json = run(&with(&["moments", "--set", "k=0,2,5", "--format", "json"]));
    assert!(stdout(&json).trim_start().starts_with('{'));
    assert_eq!(parse_rendered(&stdout(&csv)).unwrap(), parse_rendered(&stdout(&json)).unwrap());
}

#[test]
fn rerun_and_replay_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let args = with(&["capacity-sweep", "--set", "detector=mmse,zf", "--set", "rho_points=12", "--set", "outer=100"]);
    let mut first = args.clone();
    first.extend(["--out".to_string(), out.display().to_string()]);
    assert_eq!(run(&first).status.code(), Some(0));
    let again = run(&args);
    let written = std::fs::read_to_string(&out).unwrap();
    assert_eq!(stdout(&again), written);
    let replayed = bin(&["--replay", out.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(0));
    assert_eq!(stdout(&replayed), written);
    assert_eq!(parse_rendered(&written).unwrap().len(), 2);
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# comment\nm = 2\nk = 3\nseed = 5\n").unwrap();
    let p = path.to_str().unwrap();
    let o = run(&with(&["moments", "--config", p, "--set", "k=4", "--seed", "9"]));
    let t = &parse_rendered(&stdout(&o)).unwrap()[0];
    assert_eq!(t.metadata["m"], "2");
    assert_eq!(t.metadata["k"], "4");
    assert_eq!(t.metadata["seed"], "9");
    assert_eq!(t.metadata["trials"], "300");
}

#[test]
fn saturated_transmission_probability() {
    let o = run(&with(&["optimal-density", "--set", "m=2,4", "--set", "total_density=0.01"]));
    let t = &parse_rendered(&stdout(&o)).unwrap()[0];
    assert_eq!(t.column("p_t_star").unwrap(), vec![1.0, 1.0]);
    assert_eq!(t.column("saturated").unwrap(), vec![1.0, 1.0]);
    let rho = t.column("rho_star").unwrap();
    assert!(rho[0] < rho[1]);
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["moments", "--set", "bogus=1"]).status.code(), Some(1));
    let o = bin(&["moments", "--set", "eps=7"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps"));
    assert_eq!(bin(&["moments", "--config", "/nonexistent/run.conf"]).status.code(), Some(1));
    let o = bin(&["capacity-sweep", "--set", "detector=zf", "--set", "path=analytic"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported"));
    let o = run(&with(&["sinr-cdf", "--set", "snr_db=200", "--set", "k=1", "--set", "path=empirical"]));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validate_reports_and_fails_on_corrupted_eta() {
    let ok = bin(&["validate", "--set", "criteria=1,3"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let t = &parse_rendered(&stdout(&ok)).unwrap()[0];
    assert_eq!(t.column("passed").unwrap(), vec![1.0, 1.0]);
    assert!(t.metadata.contains_key("version") && t.metadata.contains_key("seed"));

    let bad = bin(&["validate", "--set", "criteria=1,3", "--set", "corrupt_eta=1e-4"]);
    assert_eq!(bad.status.code(), Some(2));
    let t = &parse_rendered(&stdout(&bad)).unwrap()[0];
    assert_eq!(t.column("passed").unwrap(), vec![1.0, 0.0]);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("FAIL criterion  3"));
}

#[test]
fn out_path_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let mut args = with(&["moments", "--format", "json", "--out"]);
    args.insert(4, out.display().to_string());
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).is_empty());
    assert!(Path::new(&out).exists());
}
