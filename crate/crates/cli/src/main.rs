use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pairs_cli::config::{simulate_observations, BenchmarkConfig, ModelConfig};
use pairs_cli::{
    calibrate_equal_cost, oracle_check, run_calibrated, run_experiment, CliError, ExperimentConfig,
    RunReport, StrategyKind,
};
use pairs_core::models::{write_observations_csv, LvParams};

#[derive(Parser)]
#[command(
    name = "pairs",
    version,
    about = "Particle filter and Pairs-algorithm experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV report.
    Run {
        #[command(flatten)]
        opts: ConfigArgs,
        /// Calibrate M_tilde to equal cost with the Pairs run before running.
        #[arg(long)]
        calibrate: bool,
    },
    /// Print the equal-cost M_tilde for the configured N and M.
    Calibrate {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Compare simulations of a finite model with its exact values.
    OracleCheck {
        #[command(flatten)]
        opts: ConfigArgs,
    },
    /// Simulate Lotka-Volterra observations to CSV (`n,y1,y2`).
    SimulateData {
        /// Observation noise variance.
        #[arg(long, default_value_t = 10.0)]
        sigma2: f64,
        /// Number of observations.
        #[arg(long, short = 'n', default_value_t = 100)]
        n_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Euler slices per unit time.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

/// A config file plus per-field overrides; flags win over the file.
#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long = "n-particles", short = 'N')]
    n_particles: Option<usize>,
    #[arg(long = "n-pairs", short = 'M')]
    n_pairs: Option<usize>,
    #[arg(long)]
    m_tilde: Option<usize>,
    #[arg(long, short = 'n')]
    n_steps: Option<usize>,
    #[arg(long, short)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// pf, pairs, mc, compare or oracle_check.
    #[arg(long)]
    strategy: Option<StrategyKind>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads (default: $PAIRS_PARALLELISM, then 1).
    #[arg(long, short = 'j')]
    parallelism: Option<usize>,
    /// Benchmark with a Pairs run of this many pairs.
    #[arg(long)]
    benchmark_m_prime: Option<usize>,
    /// Benchmark with a filter of this many particles.
    #[arg(long)]
    benchmark_n_prime: Option<usize>,
    /// LV observation file, replacing the configured data.
    #[arg(long)]
    data: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field.clone() { cfg.$field = v; } )* };
        }
        set!(n_particles, n_pairs, n_steps, replicates, strategy);
        if let Some(v) = self.m_tilde {
            cfg.m_tilde = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.root_seed = v;
        }
        if let Some(p) = &self.output {
            cfg.output_path = Some(p.clone());
        }
        if let Some(p) = self.parallelism {
            cfg.parallelism = Some(p);
        }
        if self.benchmark_m_prime.is_some() || self.benchmark_n_prime.is_some() {
            cfg.benchmark = Some(BenchmarkConfig {
                m_prime: self.benchmark_m_prime,
                n_prime: self.benchmark_n_prime,
            });
        }
        if let Some(data) = &self.data {
            match &mut cfg.model {
                ModelConfig::Lv(lv) => lv.data = Some(data.clone()),
                other => {
                    return Err(CliError::Config(format!(
                        "data: only the lv model reads observations, model is {}",
                        other.kind()
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_report(report: &RunReport, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = open_output(path)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { opts, calibrate } => {
            let cfg = opts.resolve()?;
            if cfg.strategy == StrategyKind::OracleCheck {
                return run_oracle_check(&cfg);
            }
            let report = if calibrate {
                let (report, cal) = run_calibrated(&cfg)?;
                eprintln!("calibrated m_tilde = {}", cal.m_tilde);
                report
            } else {
                run_experiment(&cfg)?
            };
            write_report(&report, cfg.output_path.as_deref())
        }
        Command::Calibrate { opts } => {
            let cfg = opts.resolve()?;
            let cal = calibrate_equal_cost(&cfg)?;
            let mut out = open_output(cfg.output_path.as_deref())?;
            writeln!(out, "# timing_t_pairs_s: {:e}", cal.t_pairs)?;
            writeln!(out, "# timing_t_pf_s: {:e}", cal.t_pf)?;
            writeln!(out, "m_tilde = {}", cal.m_tilde)?;
            out.flush()?;
            Ok(())
        }
        Command::OracleCheck { opts } => {
            let mut cfg = opts.resolve()?;
            cfg.strategy = StrategyKind::OracleCheck;
            run_oracle_check(&cfg)
        }
        Command::SimulateData {
            sigma2,
            n_steps,
            seed,
            m,
            output,
        } => {
            let params = LvParams {
                sigma2,
                m,
                ..LvParams::default()
            };
            let ys =
                simulate_observations(&params, n_steps, seed).map_err(|e| CliError::Config(e.to_string()))?;
            let mut out = open_output(output.as_deref())?;
            write_observations_csv(&mut out, &ys)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run_oracle_check(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let report = oracle_check(cfg)?;
    let mut out = open_output(cfg.output_path.as_deref())?;
    for check in &report.checks {
        writeln!(out, "{check}")?;
    }
    out.flush()?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Acceptance(report.failures().join(", ")))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
