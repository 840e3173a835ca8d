//! Particle filter with multinomial resampling at every step.
//!
//! The system keeps only the post-resampling states at the current step and
//! the running `log Z_n^N`; the weights at step `n` need nothing older than
//! the step-`n-1` parents.

use crate::error::{Error, Result};
use crate::model::{check_horizon, StateSpaceModel};
use crate::numerics::resample_log_weights_into;
use crate::rng::RandomSource;

/// Per-step log estimates; entry `n` belongs to step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    values: Vec<f64>,
}

pub type LogZTrajectory = Trajectory;

impl Trajectory {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().enumerate()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone)]
pub struct ParticleSystem<S> {
    time: usize,
    states: Vec<S>,
    log_weights: Vec<f64>,
    log_z: f64,
    proposed: Vec<S>,
    cdf: Vec<f64>,
    ancestors: Vec<usize>,
}

impl<S: Clone> ParticleSystem<S> {
    /// Draws `n_particles` states from `q_0`, weights them, records
    /// `log Z_0^N` and resamples.
    pub fn init<M>(model: &M, n_particles: usize, rng: &mut RandomSource) -> Result<Self>
    where
        M: StateSpaceModel<State = S> + ?Sized,
    {
        if n_particles == 0 {
            return Err(Error::InvalidArgument("particle count must be >= 1".into()));
        }
        let mut proposed = Vec::with_capacity(n_particles);
        let mut log_weights = Vec::with_capacity(n_particles);
        for _ in 0..n_particles {
            let x = model.sample_q0(rng);
            log_weights.push(model.log_weight_0(&x));
            proposed.push(x);
        }
        let mut sys = Self {
            time: 0,
            states: Vec::with_capacity(n_particles),
            log_weights,
            log_z: 0.0,
            proposed,
            cdf: Vec::with_capacity(n_particles),
            ancestors: Vec::with_capacity(n_particles),
        };
        sys.accumulate_and_resample(rng).map_err(|e| e.at_step(0))?;
        Ok(sys)
    }

    /// Propagates every particle through `q_{n+1}`, weights, updates
    /// `log Z` and resamples.
    pub fn step<M>(&mut self, model: &M, rng: &mut RandomSource) -> Result<()>
    where
        M: StateSpaceModel<State = S> + ?Sized,
    {
        let n = self.time + 1;
        self.proposed.clear();
        self.log_weights.clear();
        for parent in &self.states {
            let x = model.sample_q(n, parent, rng);
            self.log_weights.push(model.log_weight(n, parent, &x));
            self.proposed.push(x);
        }
        self.time = n;
        self.accumulate_and_resample(rng).map_err(|e| e.at_step(n))
    }

    fn accumulate_and_resample(&mut self, rng: &mut RandomSource) -> Result<()> {
        let count = self.proposed.len();
        let log_total =
            resample_log_weights_into(&self.log_weights, count, rng, &mut self.cdf, &mut self.ancestors)?;
        self.log_z += log_total - (count as f64).ln();
        self.states.clear();
        self.states
            .extend(self.ancestors.iter().map(|&a| self.proposed[a].clone()));
        Ok(())
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn particle_count(&self) -> usize {
        self.states.len()
    }

    /// Equally weighted states after the latest resampling.
    pub fn states(&self) -> &[S] {
        &self.states
    }

    /// Log-weights computed at the current step, before resampling.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Linear-domain `Z_n^N`; underflows to zero for long runs.
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

/// Runs the filter for steps `0..=n_steps` and returns `log Z_n^N` per step.
pub fn pf_run<M>(
    model: &M,
    n_particles: usize,
    n_steps: usize,
    rng: &mut RandomSource,
) -> Result<LogZTrajectory>
where
    M: StateSpaceModel + ?Sized,
{
    check_horizon(model, n_steps)?;
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut sys = ParticleSystem::init(model, n_particles, rng)?;
    values.push(sys.log_z());
    for _ in 0..n_steps {
        sys.step(model, rng)?;
        values.push(sys.log_z());
    }
    Ok(Trajectory::new(values))
}
