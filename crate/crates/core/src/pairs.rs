//! The Pairs algorithm: a particle system over pairs of states whose running
//! product `Xi_n^(N,M)` is an unbiased estimate of `E[(Z_n^N)^2]`, the second
//! moment of the particle filter's marginal likelihood estimate, at `O(M)`
//! cost per step regardless of `N`.
//!
//! Each pair particle carries a "check" half and a "hat" half. A pair's
//! weight mixes the squared check weight (the two filter copies share an
//! ancestor, probability `1/N`) with the product of both halves' weights
//! (distinct ancestors, probability `1 - 1/N`). After resampling, each pair
//! coalesces with the posterior probability of the shared-ancestor branch,
//! which overwrites the hat's current state with the check's.
//!
//! Coalescence only rewrites `hat_cur`. The step-`n+1` weight reads the hat
//! path through `(hat_cur, hat_next)`, so the stale `hat_prev` is never
//! read again once the step-`n` weight has been taken.
//!
//! Propagation to step `n+1` happens at the start of [`PairSystem::step`]
//! rather than at the end of the previous step; the draws are the same, but
//! a run never proposes past its last observation.

use std::mem;

use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::Trajectory;
use crate::model::{check_horizon, StateSpaceModel};
use crate::numerics::{log_add_exp, resample_log_weights_into};
use crate::rng::RandomSource;

pub type LogXiTrajectory = Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct PairParticle<S> {
    pub check_prev: S,
    pub check_cur: S,
    pub hat_prev: S,
    pub hat_cur: S,
}

impl<S: Clone> PairParticle<S> {
    /// A time-0 pair; the `prev` slots mirror `cur` and are never read.
    pub fn initial(check: S, hat: S) -> Self {
        Self {
            check_prev: check.clone(),
            check_cur: check,
            hat_prev: hat.clone(),
            hat_cur: hat,
        }
    }
}

/// Mixture coefficients `ln(1/N)`, `ln(1 - 1/N)` and `ln(N - 1)` for a fixed `N`.
#[derive(Debug, Clone, Copy)]
pub struct PairMixture {
    particles: usize,
    ln_shared: f64,
    ln_distinct: f64,
    ln_n_minus_one: f64,
}

impl PairMixture {
    pub fn new(n_particles: usize) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::InvalidArgument(format!(
                "Pairs algorithm needs N >= 2, got {n_particles}"
            )));
        }
        let n = n_particles as f64;
        Ok(Self {
            particles: n_particles,
            ln_shared: -n.ln(),
            ln_distinct: (1.0 - 1.0 / n).ln(),
            ln_n_minus_one: (n - 1.0).ln(),
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Log pair weight from the two halves' log importance weights.
    #[inline]
    pub fn log_weight(&self, check: f64, hat: f64) -> f64 {
        log_add_exp(self.ln_shared + 2.0 * check, self.ln_distinct + check + hat)
    }

    /// `1 / (1 + (N-1) exp(hat - check))`, saturating to exactly 0 or 1.
    #[inline]
    pub fn coalescence_prob(&self, check: f64, hat: f64) -> Option<f64> {
        if check == f64::NEG_INFINITY {
            return if hat == f64::NEG_INFINITY { None } else { Some(0.0) };
        }
        if hat == f64::NEG_INFINITY {
            return Some(1.0);
        }
        let t = self.ln_n_minus_one + (hat - check);
        Some(if t > 0.0 {
            let e = (-t).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + t.exp())
        })
    }
}

/// Time-0 pair log weight.
pub fn pair_log_weight_0<M>(model: &M, check: &M::State, hat: &M::State, n_particles: usize) -> Result<f64>
where
    M: StateSpaceModel + ?Sized,
{
    let mix = PairMixture::new(n_particles)?;
    Ok(mix.log_weight(model.log_weight_0(check), model.log_weight_0(hat)))
}

/// Step-`n` pair log weight (`n >= 1`).
pub fn pair_log_weight_n<M>(
    model: &M,
    n: usize,
    pair: &PairParticle<M::State>,
    n_particles: usize,
) -> Result<f64>
where
    M: StateSpaceModel + ?Sized,
{
    let mix = PairMixture::new(n_particles)?;
    let (a, b) = half_log_weights(model, n, pair);
    Ok(mix.log_weight(a, b))
}

/// Probability that the pair coalesces at step `n`.
pub fn coalescence_prob<M>(
    model: &M,
    n: usize,
    pair: &PairParticle<M::State>,
    n_particles: usize,
) -> Result<f64>
where
    M: StateSpaceModel + ?Sized,
{
    let mix = PairMixture::new(n_particles)?;
    let (a, b) = half_log_weights(model, n, pair);
    mix.coalescence_prob(a, b)
        .ok_or(Error::DegeneratePair { step: n, pair: 0 })
}

fn half_log_weights<M>(model: &M, n: usize, pair: &PairParticle<M::State>) -> (f64, f64)
where
    M: StateSpaceModel + ?Sized,
{
    if n == 0 {
        (
            model.log_weight_0(&pair.check_cur),
            model.log_weight_0(&pair.hat_cur),
        )
    } else {
        (
            model.log_weight(n, &pair.check_prev, &pair.check_cur),
            model.log_weight(n, &pair.hat_prev, &pair.hat_cur),
        )
    }
}

#[derive(Debug, Clone)]
pub struct PairSystem<S> {
    time: usize,
    mixture: PairMixture,
    pairs: Vec<PairParticle<S>>,
    log_xi: f64,
    check_lw: Vec<f64>,
    hat_lw: Vec<f64>,
    log_weights: Vec<f64>,
    cdf: Vec<f64>,
    ancestors: Vec<usize>,
    scratch: Vec<PairParticle<S>>,
    coalesced: Vec<bool>,
}

impl<S: Clone> PairSystem<S> {
    /// Draws `2M` independent `q_0` states, weights the pairs, records
    /// `log Xi_0`, resamples whole pairs and applies coalescence.
    pub fn init<M>(model: &M, n_particles: usize, n_pairs: usize, rng: &mut RandomSource) -> Result<Self>
    where
        M: StateSpaceModel<State = S> + ?Sized,
    {
        let mixture = PairMixture::new(n_particles)?;
        if n_pairs == 0 {
            return Err(Error::InvalidArgument("pair count must be >= 1".into()));
        }
        let mut scratch = Vec::with_capacity(n_pairs);
        let mut check_lw = Vec::with_capacity(n_pairs);
        let mut hat_lw = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let check = model.sample_q0(rng);
            let hat = model.sample_q0(rng);
            check_lw.push(model.log_weight_0(&check));
            hat_lw.push(model.log_weight_0(&hat));
            scratch.push(PairParticle::initial(check, hat));
        }
        let mut sys = Self {
            time: 0,
            mixture,
            pairs: Vec::with_capacity(n_pairs),
            log_xi: 0.0,
            check_lw,
            hat_lw,
            log_weights: Vec::with_capacity(n_pairs),
            cdf: Vec::with_capacity(n_pairs),
            ancestors: Vec::with_capacity(n_pairs),
            scratch,
            coalesced: vec![false; n_pairs],
        };
        sys.weight_resample_coalesce(rng).map_err(|e| e.at_step(0))?;
        Ok(sys)
    }

    /// Propagates both halves through `q_{n+1}`, then weights, accumulates
    /// `log Xi`, resamples and coalesces.
    pub fn step<M>(&mut self, model: &M, rng: &mut RandomSource) -> Result<()>
    where
        M: StateSpaceModel<State = S> + ?Sized,
    {
        let n = self.time + 1;
        self.check_lw.clear();
        self.hat_lw.clear();
        // `pairs` holds the coalesced step-`n-1` population; move it into
        // `scratch` while advancing each half by one step.
        mem::swap(&mut self.pairs, &mut self.scratch);
        for p in self.scratch.iter_mut() {
            let check_next = model.sample_q(n, &p.check_cur, rng);
            let hat_next = model.sample_q(n, &p.hat_cur, rng);
            p.check_prev = mem::replace(&mut p.check_cur, check_next);
            p.hat_prev = mem::replace(&mut p.hat_cur, hat_next);
            self.check_lw
                .push(model.log_weight(n, &p.check_prev, &p.check_cur));
            self.hat_lw.push(model.log_weight(n, &p.hat_prev, &p.hat_cur));
        }
        self.time = n;
        self.weight_resample_coalesce(rng).map_err(|e| e.at_step(n))
    }

    /// Expects the weighted population in `scratch` with half log-weights
    /// filled; leaves the resampled, coalesced population in `pairs`.
    fn weight_resample_coalesce(&mut self, rng: &mut RandomSource) -> Result<()> {
        let mix = self.mixture;
        self.log_weights.clear();
        self.log_weights.extend(
            self.check_lw
                .iter()
                .zip(&self.hat_lw)
                .map(|(&a, &b)| mix.log_weight(a, b)),
        );
        let m = self.scratch.len();
        let log_total =
            resample_log_weights_into(&self.log_weights, m, rng, &mut self.cdf, &mut self.ancestors)?;
        self.log_xi += log_total - (m as f64).ln();

        self.pairs.clear();
        for (i, &a) in self.ancestors.iter().enumerate() {
            let mut pair = self.scratch[a].clone();
            let p = mix
                .coalescence_prob(self.check_lw[a], self.hat_lw[a])
                .ok_or(Error::DegeneratePair {
                    step: self.time,
                    pair: i,
                })?;
            let coalesce = rng.random::<f64>() < p;
            if coalesce {
                pair.hat_cur = pair.check_cur.clone();
            }
            self.coalesced[i] = coalesce;
            self.pairs.push(pair);
        }
        Ok(())
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn particles(&self) -> usize {
        self.mixture.particles()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Pairs after the latest resampling and coalescence.
    pub fn pairs(&self) -> &[PairParticle<S>] {
        &self.pairs
    }

    /// Which pairs coalesced at the current step.
    pub fn coalesced(&self) -> &[bool] {
        &self.coalesced
    }

    /// Pair log-weights at the current step, before resampling.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn log_xi(&self) -> f64 {
        self.log_xi
    }
}

/// Runs the Pairs algorithm for steps `0..=n_steps`; entry `n` is
/// `log Xi_n^(N,M)`.
pub fn pairs_run<M>(
    model: &M,
    n_particles: usize,
    n_pairs: usize,
    n_steps: usize,
    rng: &mut RandomSource,
) -> Result<LogXiTrajectory>
where
    M: StateSpaceModel + ?Sized,
{
    check_horizon(model, n_steps)?;
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut sys = PairSystem::init(model, n_particles, n_pairs, rng)?;
    values.push(sys.log_xi());
    for _ in 0..n_steps {
        sys.step(model, rng)?;
        values.push(sys.log_xi());
    }
    Ok(Trajectory::new(values))
}
