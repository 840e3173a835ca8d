//! End-to-end tests of the `pairs` binary.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pairs_cli::RunReport;
use pairs_core::models::read_observations_csv;

fn pairs() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pairs"));
    cmd.env_remove("PAIRS_PARALLELISM");
    cmd
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn without_timing_lines(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# timing_"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    fs::write(&path, body).unwrap();
    path
}

const SMALL_AR1: &str = r#"
strategy = "compare"
N = 20
M = 16
n_steps = 15
replicates = 3
root_seed = 4

[model]
kind = "ar1"
"#;

#[test]
fn constant_model_reports_exact_values() {
    let out = run_ok(pairs().args(["run", "-c"]).arg(configs().join("constant.toml")));
    let report = RunReport::read_csv(&out.stdout[..]).unwrap();
    assert_eq!(report.rows.len(), 21);
    for row in &report.rows {
        assert_eq!(row.strategy, "pf");
        let expected = (row.n + 1) as f64 * 0.5f64.ln();
        assert!(
            (row.log_value - expected).abs() <= 1e-12 * expected.abs(),
            "{row:?}"
        );
    }
}

#[test]
fn output_is_deterministic_across_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_AR1);
    let one = run_ok(pairs().args(["run", "-j", "1", "-c"]).arg(&cfg));
    let again = run_ok(pairs().args(["run", "-j", "1", "-c"]).arg(&cfg));
    let three = run_ok(pairs().args(["run", "-j", "3", "-c"]).arg(&cfg));
    let from_env = run_ok(
        pairs()
            .env("PAIRS_PARALLELISM", "2")
            .args(["run", "-c"])
            .arg(&cfg),
    );
    let reference = without_timing_lines(&one.stdout);
    assert!(reference.contains("\npairs,") && reference.contains("\nmc,"));
    for other in [&again, &three, &from_env] {
        assert_eq!(reference, without_timing_lines(&other.stdout));
    }
}

#[test]
fn csv_round_trips_through_the_reader() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_AR1);
    let path = dir.path().join("out.csv");
    let out = run_ok(
        pairs()
            .args(["run", "--benchmark-m-prime", "64", "-o"])
            .arg(&path)
            .arg("-c")
            .arg(&cfg),
    );
    assert!(out.stdout.is_empty());
    let bytes = fs::read(&path).unwrap();
    let report = RunReport::read_csv(&bytes[..]).unwrap();
    assert_eq!(report.to_csv_string().as_bytes(), &bytes[..]);
    assert!(report.rows.iter().any(|r| r.strategy == "benchmark"));
    assert_eq!(report.header_value("format_version"), Some("1"));
    // 3 replicates x 16 steps for each of pairs and mc, plus one benchmark run.
    assert_eq!(report.rows.len(), 3 * 16 * 2 + 16);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_AR1);
    let out = run_ok(
        pairs()
            .args(["run", "--strategy", "pf", "-n", "4", "-r", "2", "-c"])
            .arg(&cfg),
    );
    let report = RunReport::read_csv(&out.stdout[..]).unwrap();
    assert_eq!(report.rows.len(), 2 * 5);
    assert!(report.rows.iter().all(|r| r.strategy == "pf"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "N = 0\n[model]\nkind = \"ar1\"\n",
        "unknown_key = 3\n",
        "[model]\nkind = \"finite\"\npi0 = [0.5, 0.6]\nf = [[1.0, 0.0], [0.0, 1.0]]\ng = [[1.0, 1.0]]\n",
    ] {
        let cfg = write_config(dir.path(), body);
        let out = pairs().args(["run", "-c"]).arg(&cfg).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(2),
            "{body}\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let missing = pairs()
        .args(["run", "-c", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn degenerate_weights_exit_with_3() {
    // A potential this narrow gives every particle weight zero.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "strategy = \"pf\"\nn_steps = 3\nreplicates = 1\n[model]\nkind = \"ar1\"\nobs_scale = 5e-324\n",
    );
    let out = pairs().args(["run", "-c"]).arg(&cfg).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn oracle_check_passes_on_the_shipped_config() {
    let out = run_ok(
        pairs()
            .args(["oracle-check", "-c"])
            .arg(configs().join("finite_oracle.toml")),
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn failed_oracle_check_exits_with_4() {
    // Two replicates of a two-particle filter on a two-state model: the
    // replicate values often coincide, leaving a zero standard error that
    // no finite z-score band accepts.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
N = 2
M = 2
n_steps = 1
replicates = 2
root_seed = 0

[model]
kind = "finite"
pi0 = [0.5, 0.5]
f = [[0.5, 0.5], [0.5, 0.5]]
g = [[1.0, 3.0], [1.0, 3.0]]
"#,
    );
    let out = pairs().args(["oracle-check", "-c"]).arg(&cfg).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL "));
}

#[test]
fn calibration_shrinks_m_tilde_for_larger_populations() {
    let m_tilde = |n: &str| -> usize {
        let out = run_ok(pairs().args(["calibrate", "-M", "1000", "-n", "30", "-N", n]));
        let text = String::from_utf8(out.stdout).unwrap();
        let line = text
            .lines()
            .find(|l| l.starts_with("m_tilde = "))
            .expect("m_tilde line");
        line["m_tilde = ".len()..].parse().unwrap()
    };
    let (small, large) = (m_tilde("50"), m_tilde("250"));
    assert!(large < small, "N=250 gave {large}, N=50 gave {small}");
}

#[test]
fn simulate_data_is_reproducible_and_readable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.csv");
    run_ok(
        pairs()
            .args([
                "simulate-data",
                "--sigma2",
                "200",
                "-n",
                "30",
                "--seed",
                "5",
                "-o",
            ])
            .arg(&path),
    );
    let stdout = run_ok(pairs().args(["simulate-data", "--sigma2", "200", "-n", "30", "--seed", "5"]));
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes, stdout.stdout);
    let ys = read_observations_csv(BufReader::new(&bytes[..])).unwrap();
    assert_eq!(ys.len(), 30);

    let other = run_ok(pairs().args(["simulate-data", "--sigma2", "200", "-n", "30", "--seed", "6"]));
    assert_ne!(bytes, other.stdout);
}

#[test]
fn lv_config_reads_its_data_file() {
    let out = run_ok(
        pairs()
            .args([
                "run",
                "--strategy",
                "pairs",
                "-M",
                "50",
                "-N",
                "20",
                "-r",
                "2",
                "-n",
                "10",
                "-c",
            ])
            .arg(configs().join("lv_sigma10.toml")),
    );
    let report = RunReport::read_csv(&out.stdout[..]).unwrap();
    assert_eq!(report.rows.len(), 2 * 11);
    assert!(report.rows.iter().all(|r| r.log_value.is_finite()));
}
