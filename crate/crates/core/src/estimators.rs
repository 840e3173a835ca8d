//! Replicate-based estimators and the two variance-reporting strategies.
//!
//! Variance reports are relative: divided by the squared point estimate.
//! Absolute variances underflow for long runs, and the relative figure is
//! the scale-free quantity of interest; [`VarianceReport::absolute_variance`]
//! recovers the linear value when it is representable.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::{pf_run, LogZTrajectory, Trajectory};
use crate::model::StateSpaceModel;
use crate::numerics::log_mean_exp;
use crate::pairs::{pairs_run, LogXiTrajectory};
use crate::rng::derive_stream;

/// `log Z_n^N` from independent filters at a single step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateBatch {
    pub log_z: Vec<f64>,
    pub n_particles: usize,
    pub step: usize,
    pub root_seed: u64,
    pub streams: Vec<u64>,
}

impl ReplicateBatch {
    pub fn len(&self) -> usize {
        self.log_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_z.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Mc,
    Pairs,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Mc => "mc",
            Strategy::Pairs => "pairs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub strategy: Strategy,
    /// `log` of the replicate-mean estimate of `Z_n`.
    pub log_point_estimate: f64,
    /// Estimated variance of the replicate mean divided by its square.
    /// May be negative for the Pairs strategy.
    pub relative_variance: f64,
    /// Replicate `log Z` values the report was computed from.
    pub log_z: Vec<f64>,
    /// The `log Xi` input of the Pairs strategy.
    pub log_xi: Option<f64>,
}

impl VarianceReport {
    pub fn is_negative(&self) -> bool {
        self.relative_variance < 0.0
    }

    /// Linear-domain variance estimate; zero once `Z` underflows.
    pub fn absolute_variance(&self) -> f64 {
        self.relative_variance * (2.0 * self.log_point_estimate).exp()
    }
}

/// `log` of the replicate average of `(Z_n^{N,j})^2`.
pub fn iid_second_moment(batch: &ReplicateBatch) -> Result<f64> {
    let doubled: Vec<f64> = batch.log_z.iter().map(|v| 2.0 * v).collect();
    log_mean_exp(&doubled)
}

/// Replicate mean with the unbiased sample variance of the mean.
pub fn mc_strategy(batch: &ReplicateBatch) -> Result<VarianceReport> {
    let m = batch.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "MC strategy needs at least 2 replicates, got {m}"
        )));
    }
    let point = log_mean_exp(&batch.log_z)?;
    if !point.is_finite() {
        return Err(Error::DegenerateWeights {
            step: Some(batch.step),
        });
    }
    // Replicates rescaled by the point estimate, so their mean is 1.
    let scaled: Vec<f64> = batch.log_z.iter().map(|v| (v - point).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / m as f64;
    let ss: f64 = scaled.iter().map(|r| (r - mean).powi(2)).sum();
    let sample_var = ss / (m as f64 - 1.0);
    Ok(VarianceReport {
        strategy: Strategy::Mc,
        log_point_estimate: point,
        relative_variance: sample_var / m as f64,
        log_z: batch.log_z.clone(),
        log_xi: None,
    })
}

/// Replicate mean with the variance estimate `(Xi - Zbar^2) / (M - 1)`,
/// where `log_xi` comes from one Pairs run with `n_pairs == batch.len()`.
pub fn pairs_strategy(batch: &ReplicateBatch, log_xi: f64, n_pairs: usize) -> Result<VarianceReport> {
    let m = batch.len();
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "Pairs strategy needs at least 2 replicates, got {m}"
        )));
    }
    if n_pairs != m {
        return Err(Error::InvalidArgument(format!(
            "Pairs run used M = {n_pairs} but the batch has {m} replicates"
        )));
    }
    let point = log_mean_exp(&batch.log_z)?;
    if !point.is_finite() {
        return Err(Error::DegenerateWeights {
            step: Some(batch.step),
        });
    }
    let ratio = (log_xi - 2.0 * point).exp_m1();
    Ok(VarianceReport {
        strategy: Strategy::Pairs,
        log_point_estimate: point,
        relative_variance: ratio / (m as f64 - 1.0),
        log_z: batch.log_z.clone(),
        log_xi: Some(log_xi),
    })
}

/// Full `log Z` trajectories of independent filters sharing a root seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub n_particles: usize,
    pub root_seed: u64,
    pub streams: Vec<u64>,
    pub trajectories: Vec<LogZTrajectory>,
}

impl ReplicateSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn batch_at(&self, step: usize) -> ReplicateBatch {
        ReplicateBatch {
            log_z: self.trajectories.iter().map(|t| t.at(step)).collect(),
            n_particles: self.n_particles,
            step,
            root_seed: self.root_seed,
            streams: self.streams.clone(),
        }
    }

    /// `log` of the replicate-averaged squared estimate at every step.
    pub fn iid_second_moment_trajectory(&self) -> Result<Trajectory> {
        let steps = self.trajectories.first().map_or(0, |t| t.len());
        (0..steps)
            .map(|n| iid_second_moment(&self.batch_at(n)))
            .collect::<Result<Vec<_>>>()
            .map(Trajectory::new)
    }
}

/// Maps `job` over `streams`, on `parallelism` worker threads when > 1.
/// Output order follows `streams` regardless of scheduling.
pub fn map_streams<T, F>(streams: &[u64], parallelism: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let tagged = |(i, &s): (usize, &u64)| {
        job(s).map_err(|e| Error::Replicate {
            index: i,
            source: Box::new(e),
        })
    };
    if parallelism <= 1 {
        return streams.iter().enumerate().map(tagged).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| streams.par_iter().enumerate().map(tagged).collect())
}

/// `count` independent filters on streams `0..count` of `root_seed`.
pub fn run_replicates<M>(
    model: &M,
    n_particles: usize,
    n_steps: usize,
    count: usize,
    root_seed: u64,
    parallelism: usize,
) -> Result<ReplicateSet>
where
    M: StateSpaceModel + ?Sized,
{
    let streams: Vec<u64> = (0..count as u64).collect();
    run_replicates_on(model, n_particles, n_steps, &streams, root_seed, parallelism)
}

/// [`run_replicates`] on an explicit list of stream ids.
pub fn run_replicates_on<M>(
    model: &M,
    n_particles: usize,
    n_steps: usize,
    streams: &[u64],
    root_seed: u64,
    parallelism: usize,
) -> Result<ReplicateSet>
where
    M: StateSpaceModel + ?Sized,
{
    if streams.is_empty() {
        return Err(Error::InvalidArgument("replicate count must be >= 1".into()));
    }
    let trajectories = map_streams(streams, parallelism, |s| {
        pf_run(model, n_particles, n_steps, &mut derive_stream(root_seed, s))
    })?;
    Ok(ReplicateSet {
        n_particles,
        root_seed,
        streams: streams.to_vec(),
        trajectories,
    })
}

/// Independent Pairs runs, one per stream id.
pub fn run_pairs_replicates<M>(
    model: &M,
    n_particles: usize,
    n_pairs: usize,
    n_steps: usize,
    streams: &[u64],
    root_seed: u64,
    parallelism: usize,
) -> Result<Vec<LogXiTrajectory>>
where
    M: StateSpaceModel + ?Sized,
{
    map_streams(streams, parallelism, |s| {
        pairs_run(
            model,
            n_particles,
            n_pairs,
            n_steps,
            &mut derive_stream(root_seed, s),
        )
    })
}
