//! Equal-cost calibration: how many independent filters cost as much per
//! step as one Pairs run with `M` pairs.

use std::time::Instant;

use pairs_core::rng::derive_stream;
use pairs_core::{PairSystem, ParticleSystem, StateSpaceModel};

use crate::config::ExperimentConfig;
use crate::error::CliError;

const WARMUP_STEPS: usize = 20;
const PF_PROBE: usize = 32;
const CALIBRATION_STREAM: u64 = 0xCA1B;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Median wall time of one Pairs step with `M` pairs, seconds.
    pub t_pairs: f64,
    /// Median wall time of one filter step with `N` particles, seconds.
    pub t_pf: f64,
    pub m_tilde: usize,
}

/// `round(M * t_pairs / t_pf)`, at least 1.
pub fn equal_cost_m_tilde(m: usize, t_pairs: f64, t_pf: f64) -> usize {
    ((m as f64 * t_pairs / t_pf).round() as usize).max(1)
}

pub fn calibrate_equal_cost(config: &ExperimentConfig) -> Result<Calibration, CliError> {
    config.validate()?;
    let built = config.build_model()?;
    crate::with_model!(&built, |m| calibrate_model(m, config))
}

pub(crate) fn calibrate_model<M: StateSpaceModel>(
    model: &M,
    cfg: &ExperimentConfig,
) -> Result<Calibration, CliError> {
    if cfg.n_particles < 2 {
        return Err(CliError::Config("n_particles: calibration needs N >= 2".into()));
    }
    let steps = cfg.n_steps.min(WARMUP_STEPS);
    if steps == 0 {
        return Err(CliError::Config("n_steps: calibration needs n_steps >= 1".into()));
    }
    let mut rng = derive_stream(cfg.root_seed, CALIBRATION_STREAM);

    let mut pairs = PairSystem::init(model, cfg.n_particles, cfg.n_pairs, &mut rng)?;
    let mut pair_times = Vec::with_capacity(steps);
    for _ in 0..steps {
        let t = Instant::now();
        pairs.step(model, &mut rng)?;
        pair_times.push(t.elapsed().as_secs_f64());
    }

    // A single small filter step is too short to time reliably; step a
    // probe of filters in lockstep and divide.
    let mut filters = (0..PF_PROBE)
        .map(|_| ParticleSystem::init(model, cfg.n_particles, &mut rng))
        .collect::<pairs_core::Result<Vec<_>>>()?;
    let mut pf_times = Vec::with_capacity(steps);
    for _ in 0..steps {
        let t = Instant::now();
        for f in filters.iter_mut() {
            f.step(model, &mut rng)?;
        }
        pf_times.push(t.elapsed().as_secs_f64() / PF_PROBE as f64);
    }

    let t_pairs = median(&mut pair_times);
    let t_pf = median(&mut pf_times);
    Ok(Calibration {
        t_pairs,
        t_pf,
        m_tilde: equal_cost_m_tilde(cfg.n_pairs, t_pairs, t_pf),
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}
