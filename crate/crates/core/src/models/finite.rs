use rand::Rng;

use crate::error::Result;
use crate::model::StateSpaceModel;
use crate::oracle::FiniteHmmSpec;
use crate::rng::RandomSource;

/// Integer-coded runtime model backed by a [`FiniteHmmSpec`]; every density
/// is a table lookup.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    spec: FiniteHmmSpec,
    log_pi0: Vec<f64>,
    log_f: Vec<Vec<f64>>,
    log_g: Vec<Vec<f64>>,
    log_q0: Vec<f64>,
    log_q: Vec<Vec<Vec<f64>>>,
    q0_cdf: Vec<f64>,
    q_cdf: Vec<Vec<Vec<f64>>>,
}

pub fn make_finite_toy(spec: FiniteHmmSpec) -> Result<FiniteModel> {
    spec.validate()?;
    let ln = |v: &Vec<f64>| v.iter().map(|p| p.ln()).collect::<Vec<f64>>();
    let cdf = |v: &Vec<f64>| {
        let mut acc = 0.0;
        v.iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect::<Vec<f64>>()
    };
    Ok(FiniteModel {
        log_pi0: ln(&spec.pi0),
        log_f: spec.f.iter().map(ln).collect(),
        log_g: spec.g.iter().map(ln).collect(),
        log_q0: ln(&spec.q0),
        log_q: spec.q.iter().map(|m| m.iter().map(ln).collect()).collect(),
        q0_cdf: cdf(&spec.q0),
        q_cdf: spec.q.iter().map(|m| m.iter().map(cdf).collect()).collect(),
        spec,
    })
}

fn draw(cdf: &[f64], rng: &mut RandomSource) -> usize {
    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl FiniteModel {
    pub fn spec(&self) -> &FiniteHmmSpec {
        &self.spec
    }

    fn q_index(&self, n: usize) -> usize {
        if self.log_q.len() == 1 {
            0
        } else {
            n - 1
        }
    }
}

impl StateSpaceModel for FiniteModel {
    type State = usize;

    fn state_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.spec.n_max())
    }

    fn log_pi0(&self, x: &usize) -> f64 {
        self.log_pi0[*x]
    }

    fn log_f(&self, prev: &usize, cur: &usize) -> f64 {
        self.log_f[*prev][*cur]
    }

    fn log_g(&self, n: usize, x: &usize) -> f64 {
        self.log_g[n][*x]
    }

    fn sample_q0(&self, rng: &mut RandomSource) -> usize {
        draw(&self.q0_cdf, rng)
    }

    fn log_q0(&self, x: &usize) -> f64 {
        self.log_q0[*x]
    }

    fn sample_q(&self, n: usize, prev: &usize, rng: &mut RandomSource) -> usize {
        draw(&self.q_cdf[self.q_index(n)][*prev], rng)
    }

    fn log_q(&self, n: usize, prev: &usize, cur: &usize) -> f64 {
        self.log_q[self.q_index(n)][*prev][*cur]
    }
}
