//! Statistical checks of a finite model's simulations against its exact
//! oracle values, reported as z-scores.

use pairs_core::estimators::{map_streams, run_replicates_on};
use pairs_core::oracle::{
    exact_marginal_likelihood, exact_second_moment, exact_second_moment_epsilon, exact_second_moment_tensor,
};
use pairs_core::rng::derive_stream;
use pairs_core::stats::Summary;
use pairs_core::{mc_strategy, pairs_run, pairs_strategy, pf_run, StateSpaceModel};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{mc_stream, pairs_stream, pf_stream};

/// Largest `|z|` accepted by the statistical checks.
pub const Z_THRESHOLD: f64 = 4.0;
const ORACLE_AGREEMENT_TOL: f64 = 1e-12;
const MAX_EPSILON_STEP: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Sample mean (or computed value) relative to the exact target's scale.
    pub estimate: f64,
    pub exact: f64,
    /// `None` for deterministic comparisons.
    pub z: Option<f64>,
    pub passed: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {:<16} estimate={:.6e} exact={:.6e}",
            self.name, self.estimate, self.exact
        )?;
        match self.z {
            Some(z) => write!(f, " z={z:+.3}"),
            None => write!(f, " rel_diff={:.3e}", (self.estimate / self.exact - 1.0).abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

fn z_check(name: &'static str, values: &[f64], exact: f64) -> Check {
    let summary = Summary::of(values);
    let z = summary.z_score(exact);
    Check {
        name,
        estimate: summary.mean,
        exact,
        z: Some(z),
        passed: z.abs() < Z_THRESHOLD,
    }
}

/// Runs every check at step `n_steps`, using `replicates` independent
/// trials. Values are scaled by the exact `Z_n` (or its square) so they
/// stay representable.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<CheckReport, CliError> {
    cfg.validate()?;
    let spec = cfg
        .finite_spec()
        .ok_or_else(|| CliError::Config("strategy: oracle_check needs a finite or iid_toy model".into()))?
        .map_err(|e| CliError::Config(format!("model: {e}")))?;
    let built = cfg.build_model()?;
    let n = cfg.n_steps;
    let np = cfg.n_particles;
    let m = cfg.n_pairs;
    let log_z = exact_marginal_likelihood(&spec, n)?;
    let log_m2 = exact_second_moment(&spec, np, n)?;
    // Var[Zbar] / Z^2 for a mean of M independent filters.
    let rel_var_exact = (log_m2 - 2.0 * log_z).exp_m1() / m as f64;

    let mut report = CheckReport::default();
    if n <= MAX_EPSILON_STEP {
        let tensor = exact_second_moment_tensor(&spec, np, n)?;
        let eps = exact_second_moment_epsilon(&spec, np, n)?;
        let rel = (eps - tensor).exp();
        report.checks.push(Check {
            name: "oracle_agreement",
            estimate: rel,
            exact: 1.0,
            z: None,
            passed: (rel - 1.0).abs() < ORACLE_AGREEMENT_TOL,
        });
    }

    let seed = cfg.root_seed;
    let par = cfg.effective_parallelism();
    let trials: Vec<u64> = (0..cfg.replicates as u64).collect();
    crate::with_model!(&built, |model| {
        run_checks(
            model,
            cfg,
            &trials,
            seed,
            par,
            log_z,
            log_m2,
            rel_var_exact,
            &mut report,
        )
    })?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_checks<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
    trials: &[u64],
    seed: u64,
    par: usize,
    log_z: f64,
    log_m2: f64,
    rel_var_exact: f64,
    report: &mut CheckReport,
) -> Result<(), CliError> {
    let (n, np, m) = (cfg.n_steps, cfg.n_particles, cfg.n_pairs);

    let z: Vec<f64> = map_streams(trials, par, |j| {
        let t = pf_run(model, np, n, &mut derive_stream(seed, pf_stream(j as usize)))?;
        Ok((t.at(n) - log_z).exp())
    })?;
    report.checks.push(z_check("pf_mean", &z, 1.0));

    let xi: Vec<f64> = map_streams(trials, par, |j| {
        let t = pairs_run(
            model,
            np,
            m,
            n,
            &mut derive_stream(seed, pairs_stream(j as usize)),
        )?;
        Ok(t.at(n))
    })?;
    let scaled: Vec<f64> = xi.iter().map(|v| (v - log_m2).exp()).collect();
    report.checks.push(z_check("pairs_mean", &scaled, 1.0));

    // Both strategies' reports, rescaled from Zbar^2 to Z^2 units.
    let mut mc = Vec::with_capacity(trials.len());
    let mut pairs = Vec::with_capacity(trials.len());
    for (j, &log_xi) in xi.iter().enumerate() {
        let streams: Vec<u64> = (0..m).map(|k| mc_stream(j, k)).collect();
        let batch = run_replicates_on(model, np, n, &streams, seed, par)?.batch_at(n);
        let a = mc_strategy(&batch)?;
        mc.push(a.relative_variance * (2.0 * (a.log_point_estimate - log_z)).exp());
        let b = pairs_strategy(&batch, log_xi, m)?;
        pairs.push(b.relative_variance * (2.0 * (b.log_point_estimate - log_z)).exp());
    }
    report.checks.push(z_check("mc_strategy", &mc, rel_var_exact));
    report
        .checks
        .push(z_check("pairs_strategy", &pairs, rel_var_exact));
    Ok(())
}
