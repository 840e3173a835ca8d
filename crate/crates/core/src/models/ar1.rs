use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::gauss::normal_log_pdf;
use crate::error::{Error, Result};
use crate::model::StateSpaceModel;
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ar1Params {
    pub alpha: f64,
    pub sigma: f64,
    /// `log g_n(x) = -x^2 / obs_scale`.
    pub obs_scale: f64,
}

impl Default for Ar1Params {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            sigma: 10.0,
            obs_scale: 100.0,
        }
    }
}

/// Stationary AR(1) signal `X_{n+1} = alpha X_n + sigma eps` under the fixed
/// potential `g_n(x) = exp(-x^2 / obs_scale)`, with `q_0 = pi_0` and `q_n = f`.
#[derive(Debug, Clone)]
pub struct Ar1Model {
    params: Ar1Params,
    stationary_var: f64,
    stationary_sd: f64,
    noise_var: f64,
}

pub fn make_ar1(params: Ar1Params) -> Result<Ar1Model> {
    if !(params.alpha.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "AR(1) needs |alpha| < 1, got {}",
            params.alpha
        )));
    }
    if !(params.sigma > 0.0) || !(params.obs_scale > 0.0) {
        return Err(Error::InvalidArgument(
            "AR(1) needs sigma > 0 and obs_scale > 0".into(),
        ));
    }
    let noise_var = params.sigma * params.sigma;
    let stationary_var = noise_var / (1.0 - params.alpha * params.alpha);
    Ok(Ar1Model {
        params,
        stationary_var,
        stationary_sd: stationary_var.sqrt(),
        noise_var,
    })
}

impl Ar1Model {
    pub fn params(&self) -> &Ar1Params {
        &self.params
    }

    pub fn stationary_variance(&self) -> f64 {
        self.stationary_var
    }

    fn transition_log_pdf(&self, prev: f64, cur: f64) -> f64 {
        normal_log_pdf(cur, self.params.alpha * prev, self.noise_var)
    }
}

impl StateSpaceModel for Ar1Model {
    type State = f64;

    fn state_dim(&self) -> usize {
        1
    }

    fn log_pi0(&self, x: &f64) -> f64 {
        normal_log_pdf(*x, 0.0, self.stationary_var)
    }

    fn log_f(&self, prev: &f64, cur: &f64) -> f64 {
        self.transition_log_pdf(*prev, *cur)
    }

    fn log_g(&self, _n: usize, x: &f64) -> f64 {
        -x * x / self.params.obs_scale
    }

    fn sample_q0(&self, rng: &mut RandomSource) -> f64 {
        self.stationary_sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_q0(&self, x: &f64) -> f64 {
        self.log_pi0(x)
    }

    fn sample_q(&self, _n: usize, prev: &f64, rng: &mut RandomSource) -> f64 {
        self.params.alpha * prev + self.params.sigma * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_q(&self, _n: usize, prev: &f64, cur: &f64) -> f64 {
        self.transition_log_pdf(*prev, *cur)
    }

    // Proposal equals prior, so the ratios cancel exactly.
    fn log_weight_0(&self, x: &f64) -> f64 {
        self.log_g(0, x)
    }

    fn log_weight(&self, n: usize, _prev: &f64, cur: &f64) -> f64 {
        self.log_g(n, cur)
    }
}
