use rand::Rng;

use crate::error::{Error, Result};
use crate::model::StateSpaceModel;
use crate::oracle::FiniteHmmSpec;
use crate::rng::RandomSource;

/// Every state is an independent `pi0` draw and `g_n = g` at every step,
/// so `Z_n^N` is a product of independent sample means of `g`.
#[derive(Debug, Clone)]
pub struct IidToy {
    g: Vec<f64>,
    pi0: Vec<f64>,
    log_g: Vec<f64>,
    log_pi0: Vec<f64>,
    cdf: Vec<f64>,
}

pub fn make_iid_toy(g_values: Vec<f64>, pi0: Vec<f64>) -> Result<IidToy> {
    if g_values.len() != pi0.len() || pi0.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "g has {} entries, pi0 has {}",
            g_values.len(),
            pi0.len()
        )));
    }
    // Reuse the finite-spec validation for positivity and normalization.
    FiniteHmmSpec::iid(g_values.clone(), pi0.clone(), 0)?;
    let mut acc = 0.0;
    let cdf = pi0
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Ok(IidToy {
        log_g: g_values.iter().map(|v| v.ln()).collect(),
        log_pi0: pi0.iter().map(|v| v.ln()).collect(),
        g: g_values,
        pi0,
        cdf,
    })
}

impl IidToy {
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn pi0(&self) -> &[f64] {
        &self.pi0
    }

    /// The same model as a finite spec with observations up to `n_max`.
    pub fn to_spec(&self, n_max: usize) -> Result<FiniteHmmSpec> {
        FiniteHmmSpec::iid(self.g.clone(), self.pi0.clone(), n_max)
    }

    fn draw(&self, rng: &mut RandomSource) -> usize {
        let u = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

impl StateSpaceModel for IidToy {
    type State = usize;

    fn state_dim(&self) -> usize {
        1
    }

    fn log_pi0(&self, x: &usize) -> f64 {
        self.log_pi0[*x]
    }

    fn log_f(&self, _prev: &usize, cur: &usize) -> f64 {
        self.log_pi0[*cur]
    }

    fn log_g(&self, _n: usize, x: &usize) -> f64 {
        self.log_g[*x]
    }

    fn sample_q0(&self, rng: &mut RandomSource) -> usize {
        self.draw(rng)
    }

    fn log_q0(&self, x: &usize) -> f64 {
        self.log_pi0[*x]
    }

    fn sample_q(&self, _n: usize, _prev: &usize, rng: &mut RandomSource) -> usize {
        self.draw(rng)
    }

    fn log_q(&self, _n: usize, _prev: &usize, cur: &usize) -> f64 {
        self.log_pi0[*cur]
    }

    fn log_weight_0(&self, x: &usize) -> f64 {
        self.log_g[*x]
    }

    fn log_weight(&self, _n: usize, _prev: &usize, cur: &usize) -> f64 {
        self.log_g[*cur]
    }
}
