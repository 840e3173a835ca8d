//! Runs a configured experiment and gathers its rows into a [`RunReport`].
//!
//! Every replicate draws from its own stream of `root_seed`, laid out so
//! that strategies never share randomness:
//!
//! | rows                 | stream id                      |
//! |----------------------|--------------------------------|
//! | `pf`, replicate `j`  | `j`                            |
//! | `pairs`, replicate `j` | `1 << 62 \| j`               |
//! | `mc`, replicate `j`, filter `k` | `2 << 62 \| j << 32 \| k` |
//! | `benchmark`          | `3 << 62`                      |

use std::time::Instant;

use pairs_core::estimators::{map_streams, run_replicates_on};
use pairs_core::{mc_strategy, pairs_run, pairs_strategy, pf_run, rng::derive_stream, StateSpaceModel};

use crate::calibrate::{calibrate_model, Calibration};
use crate::config::{ExperimentConfig, StrategyKind, DEFAULT_M_PRIME};
use crate::error::CliError;
use crate::report::{Row, RunReport, FORMAT_VERSION};
use crate::with_model;

const STRATEGY_SHIFT: u32 = 62;
const MC_REPLICATE_SHIFT: u32 = 32;

pub fn pf_stream(replicate: usize) -> u64 {
    replicate as u64
}

pub fn pairs_stream(replicate: usize) -> u64 {
    1 << STRATEGY_SHIFT | replicate as u64
}

pub fn mc_stream(replicate: usize, filter: usize) -> u64 {
    2 << STRATEGY_SHIFT | (replicate as u64) << MC_REPLICATE_SHIFT | filter as u64
}

pub const BENCHMARK_STREAM: u64 = 3 << STRATEGY_SHIFT;

/// Runs `config` (any strategy except `oracle_check`).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    run_experiment_with(config, None)
}

/// As [`run_experiment`], recording a prior calibration in the header.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    calibration: Option<&Calibration>,
) -> Result<RunReport, CliError> {
    config.validate()?;
    if config.strategy == StrategyKind::OracleCheck {
        return Err(CliError::Config(
            "strategy: oracle_check runs through the oracle-check subcommand".into(),
        ));
    }
    if config.m_tilde() >= 1 << MC_REPLICATE_SHIFT || config.replicates >= 1 << 30 {
        return Err(CliError::Config(
            "m_tilde or replicates too large for the stream layout".into(),
        ));
    }
    let started = Instant::now();
    let built = config.build_model()?;
    let mut report = header_for(config);
    if let Some(c) = calibration {
        report.push_header("timing_t_pairs_s", c.t_pairs);
        report.push_header("timing_t_pf_s", c.t_pf);
    }
    report.rows = with_model!(&built, |m| collect_rows(m, config))?;
    report.sort_rows();
    report.push_header("timing_total_s", started.elapsed().as_secs_f64());
    Ok(report)
}

/// Runs `config` after calibrating `M_tilde` to equal cost with the Pairs run.
pub fn run_calibrated(config: &ExperimentConfig) -> Result<(RunReport, Calibration), CliError> {
    config.validate()?;
    let built = config.build_model()?;
    let cal = with_model!(&built, |m| calibrate_model(m, config))?;
    let calibrated = ExperimentConfig {
        m_tilde: Some(cal.m_tilde),
        ..config.clone()
    };
    let report = run_experiment_with(&calibrated, Some(&cal))?;
    Ok((report, cal))
}

fn header_for(config: &ExperimentConfig) -> RunReport {
    let mut report = RunReport::default();
    report.push_header("format_version", FORMAT_VERSION);
    report.push_header("tool", concat!("pairs ", env!("CARGO_PKG_VERSION")));
    report.push_header("git_revision", git_revision());
    // Parallelism and the output location do not affect any value.
    let echoed = ExperimentConfig {
        parallelism: None,
        output_path: None,
        ..config.clone()
    };
    for line in echoed.to_toml().lines().filter(|l| !l.trim().is_empty()) {
        report.push_header("config", line);
    }
    report
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn collect_rows<M: StateSpaceModel>(model: &M, cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let seed = cfg.root_seed;
    let n = cfg.n_steps;
    let np = cfg.n_particles;
    let par = cfg.effective_parallelism();
    let replicates: Vec<u64> = (0..cfg.replicates as u64).collect();
    let mut rows = Vec::new();

    if cfg.strategy == StrategyKind::Pf {
        let trajs = map_streams(&replicates, par, |j| {
            pf_run(model, np, n, &mut derive_stream(seed, pf_stream(j as usize)))
        })?;
        for (j, t) in trajs.iter().enumerate() {
            rows.extend(
                t.iter()
                    .map(|(step, v)| row("pf", j, step, v, None, pf_stream(j))),
            );
        }
    }

    let pairs_trajs = if matches!(cfg.strategy, StrategyKind::Pairs | StrategyKind::Compare) {
        Some(map_streams(&replicates, par, |j| {
            pairs_run(
                model,
                np,
                cfg.n_pairs,
                n,
                &mut derive_stream(seed, pairs_stream(j as usize)),
            )
        })?)
    } else {
        None
    };

    // With equal replicate counts the Pairs variance report can be formed
    // from replicate `j`'s filters and Pairs run.
    let paired = cfg.strategy == StrategyKind::Compare && cfg.m_tilde() == cfg.n_pairs;
    if matches!(cfg.strategy, StrategyKind::Mc | StrategyKind::Compare) {
        for j in 0..cfg.replicates {
            let streams: Vec<u64> = (0..cfg.m_tilde()).map(|k| mc_stream(j, k)).collect();
            let set = run_replicates_on(model, np, n, &streams, seed, par)?;
            let xi_tilde = set.iid_second_moment_trajectory()?;
            for (step, v) in xi_tilde.iter() {
                let batch = set.batch_at(step);
                let mc = mc_strategy(&batch)?;
                rows.push(row("mc", j, step, v, Some(mc.relative_variance), mc_stream(j, 0)));
                if let (true, Some(trajs)) = (paired, &pairs_trajs) {
                    let xi = trajs[j].at(step);
                    let rel = pairs_strategy(&batch, xi, cfg.n_pairs)?.relative_variance;
                    rows.push(row("pairs", j, step, xi, Some(rel), pairs_stream(j)));
                }
            }
        }
    }

    if let (false, Some(trajs)) = (paired, &pairs_trajs) {
        for (j, t) in trajs.iter().enumerate() {
            rows.extend(
                t.iter()
                    .map(|(step, v)| row("pairs", j, step, v, None, pairs_stream(j))),
            );
        }
    }
    add_benchmark(model, cfg, &mut rows)?;
    Ok(rows)
}

fn add_benchmark<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
    rows: &mut Vec<Row>,
) -> Result<(), CliError> {
    if let Some(b) = cfg.benchmark {
        let mut rng = derive_stream(cfg.root_seed, BENCHMARK_STREAM);
        let (flag, values) = match b.n_prime {
            Some(n_prime) => {
                let t = pf_run(model, n_prime, cfg.n_steps, &mut rng)?;
                (
                    format!("pf_n_prime={n_prime}"),
                    t.values().iter().map(|v| 2.0 * v).collect(),
                )
            }
            None => {
                let m_prime = b.m_prime.unwrap_or(DEFAULT_M_PRIME);
                let t = pairs_run(model, cfg.n_particles, m_prime, cfg.n_steps, &mut rng)?;
                (format!("pairs_m_prime={m_prime}"), t.into_values())
            }
        };
        for (step, v) in values.into_iter().enumerate() {
            let mut r = row("benchmark", 0, step, v, None, BENCHMARK_STREAM);
            r.flag = flag.clone();
            rows.push(r);
        }
    }
    Ok(())
}

fn row(strategy: &str, replicate: usize, n: usize, log_value: f64, rel_var: Option<f64>, seed: u64) -> Row {
    Row {
        strategy: strategy.to_string(),
        replicate,
        n,
        log_value,
        rel_var,
        flag: match rel_var {
            Some(v) if v < 0.0 => "negative".into(),
            _ => String::new(),
        },
        seed,
    }
}
