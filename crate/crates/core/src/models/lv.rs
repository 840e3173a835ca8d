//! Euler-discretized stochastic Lotka-Volterra dynamics observed in Gaussian
//! noise, filtered with a guided Gaussian proposal that conditions each
//! Euler slice on the next observation.
//!
//! With `m` Euler slices per unit time, the HMM state at step `n >= 1` is
//! the block `(X_{n-1+dt}, ..., X_n)`; the step-0 state is the single point
//! `x0`. Observations are `y_1, y_2, ...` at integer times; there is no
//! observation at time 0, so `g_0 = 1`.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use super::gauss::LN_2PI;
use crate::error::{Error, Result};
use crate::model::StateSpaceModel;
use crate::rng::RandomSource;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LvParams {
    /// Rate constants `(c1, c2, c3)`.
    pub c: [f64; 3],
    /// Observation noise variance; the noise covariance is `sigma2 * I`.
    pub sigma2: f64,
    /// Euler slices per unit time.
    pub m: usize,
    pub x0: Vec2,
    /// Populations are clamped to this floor before drift and diffusion are evaluated.
    pub floor: f64,
    /// Added to the diagonal of the diffusion matrix.
    pub jitter: f64,
    /// `y_seq[n - 1]` is the observation at integer time `n`.
    #[serde(skip)]
    pub y_seq: Vec<Vec2>,
}

impl Default for LvParams {
    fn default() -> Self {
        Self {
            c: [0.5, 0.0025, 0.3],
            sigma2: 10.0,
            m: 1,
            x0: [100.0, 100.0],
            floor: 1e-6,
            jitter: 1e-10,
            y_seq: Vec::new(),
        }
    }
}

impl LvParams {
    fn validate(&self) -> Result<()> {
        if self.c.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidArgument(
                "LV rate constants must be positive".into(),
            ));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("LV needs m >= 1".into()));
        }
        if !(self.sigma2 >= 0.0) || !(self.floor > 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::InvalidArgument(
                "LV needs sigma2 >= 0, floor > 0, jitter >= 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn lv_drift(x: Vec2, c: [f64; 3]) -> Vec2 {
    let inter = c[1] * x[0] * x[1];
    [c[0] * x[0] - inter, inter - c[2] * x[1]]
}

pub fn lv_diffusion(x: Vec2, c: [f64; 3]) -> Mat2 {
    let inter = c[1] * x[0] * x[1];
    [[c[0] * x[0] + inter, -inter], [-inter, inter + c[2] * x[1]]]
}

fn mat_add(a: Mat2, b: Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

fn mat_scale(a: Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

fn mat_vec(a: Mat2, v: Vec2) -> Vec2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn mat_inv(a: Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det.is_finite() && det != 0.0) {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

fn diag(v: f64) -> Mat2 {
    [[v, 0.0], [0.0, v]]
}

/// Lower Cholesky factor of a symmetric 2x2 matrix, `None` unless positive definite.
fn cholesky(a: Mat2) -> Option<Mat2> {
    let off = 0.5 * (a[0][1] + a[1][0]);
    if !(a[0][0] > 0.0) {
        return None;
    }
    let l00 = a[0][0].sqrt();
    let l10 = off / l00;
    let rest = a[1][1] - l10 * l10;
    if !(rest > 0.0) {
        return None;
    }
    Some([[l00, 0.0], [l10, rest.sqrt()]])
}

/// Gaussian sampler/density with a precomputed Cholesky factor.
#[derive(Debug, Clone, Copy)]
struct Gaussian2 {
    mean: Vec2,
    chol: Mat2,
}

impl Gaussian2 {
    fn new(mean: Vec2, cov: Mat2) -> Option<Self> {
        cholesky(cov).map(|chol| Self { mean, chol })
    }

    fn sample(&self, rng: &mut RandomSource) -> Vec2 {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        self.shifted([z0, z1])
    }

    fn shifted(&self, z: Vec2) -> Vec2 {
        let l = self.chol;
        [
            self.mean[0] + l[0][0] * z[0],
            self.mean[1] + l[1][0] * z[0] + l[1][1] * z[1],
        ]
    }

    fn log_pdf(&self, x: Vec2) -> f64 {
        let l = self.chol;
        let d0 = x[0] - self.mean[0];
        let d1 = x[1] - self.mean[1];
        // Solve L z = d.
        let z0 = d0 / l[0][0];
        let z1 = (d1 - l[1][0] * z0) / l[1][1];
        -LN_2PI - (l[0][0] * l[1][1]).ln() - 0.5 * (z0 * z0 + z1 * z1)
    }
}

/// The HMM state: the Euler slices of one unit time interval (or `x0` at step 0).
#[derive(Debug, Clone, PartialEq)]
pub struct LvState {
    pub slices: SmallVec<[Vec2; 1]>,
}

impl LvState {
    pub fn point(x: Vec2) -> Self {
        Self { slices: smallvec![x] }
    }

    /// Population at the block's final (integer) time.
    pub fn last(&self) -> Vec2 {
        self.slices[self.slices.len() - 1]
    }
}

#[derive(Debug)]
pub struct LvModel {
    params: LvParams,
    dt: f64,
    degenerate: AtomicU64,
}

pub fn make_lv(params: LvParams) -> Result<LvModel> {
    params.validate()?;
    if !(params.sigma2 > 0.0) {
        return Err(Error::InvalidArgument("filtering needs sigma2 > 0".into()));
    }
    Ok(LvModel {
        dt: 1.0 / params.m as f64,
        params,
        degenerate: AtomicU64::new(0),
    })
}

impl LvModel {
    pub fn params(&self) -> &LvParams {
        &self.params
    }

    /// Number of weights forced to zero because a proposal covariance was
    /// not positive definite.
    pub fn degenerate_count(&self) -> u64 {
        self.degenerate.load(Ordering::Relaxed)
    }

    fn clamp(&self, x: Vec2) -> Vec2 {
        [x[0].max(self.params.floor), x[1].max(self.params.floor)]
    }

    fn diffusion(&self, x: Vec2) -> Mat2 {
        mat_add(
            lv_diffusion(self.clamp(x), self.params.c),
            diag(self.params.jitter),
        )
    }

    fn euler(&self, x: Vec2) -> Option<Gaussian2> {
        let a = lv_drift(self.clamp(x), self.params.c);
        let mean = [x[0] + a[0] * self.dt, x[1] + a[1] * self.dt];
        Gaussian2::new(mean, mat_scale(self.diffusion(x), self.dt))
    }

    /// Guided drift `a_j` and covariance rate `b_j` for slice `j` starting
    /// at `x`, conditioned on the next observation `y`.
    pub fn guided_moments(&self, x: Vec2, y: Vec2, j: usize) -> Option<(Vec2, Mat2)> {
        let alpha = lv_drift(self.clamp(x), self.params.c);
        let beta = self.diffusion(x);
        let remaining = 1.0 - j as f64 * self.dt;
        let gain = mat_inv(mat_add(mat_scale(beta, remaining), diag(self.params.sigma2)))?;
        let beta_gain = mat_mul(beta, gain);
        let resid = [
            y[0] - (x[0] + alpha[0] * remaining),
            y[1] - (x[1] + alpha[1] * remaining),
        ];
        let corr = mat_vec(beta_gain, resid);
        let a = [alpha[0] + corr[0], alpha[1] + corr[1]];
        let shrink = mat_scale(mat_mul(beta_gain, beta), self.dt);
        let b = [
            [beta[0][0] - shrink[0][0], beta[0][1] - shrink[0][1]],
            [beta[1][0] - shrink[1][0], beta[1][1] - shrink[1][1]],
        ];
        Some((a, b))
    }

    fn guided(&self, x: Vec2, y: Vec2, j: usize) -> Option<Gaussian2> {
        let (a, b) = self.guided_moments(x, y, j)?;
        let mean = [x[0] + a[0] * self.dt, x[1] + a[1] * self.dt];
        Gaussian2::new(mean, mat_scale(b, self.dt))
    }

    fn observation(&self, n: usize) -> Vec2 {
        self.params.y_seq[n - 1]
    }
}

impl StateSpaceModel for LvModel {
    type State = LvState;

    fn state_dim(&self) -> usize {
        2 * self.params.m
    }

    fn horizon(&self) -> Option<usize> {
        Some(self.params.y_seq.len())
    }

    // X_0 is the fixed point x0: pi_0 and q_0 are the same point mass, and
    // densities are taken with respect to that atom.
    fn log_pi0(&self, x: &LvState) -> f64 {
        if x.slices.len() == 1 && x.last() == self.params.x0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_f(&self, prev: &LvState, cur: &LvState) -> f64 {
        let mut from = prev.last();
        let mut total = 0.0;
        for &to in &cur.slices {
            match self.euler(from) {
                Some(g) => total += g.log_pdf(to),
                None => return f64::NAN,
            }
            from = to;
        }
        total
    }

    fn log_g(&self, n: usize, x: &LvState) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let y = self.observation(n);
        let v = self.params.sigma2;
        let x = x.last();
        let d2 = (y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2);
        -LN_2PI - v.ln() - 0.5 * d2 / v
    }

    fn sample_q0(&self, _rng: &mut RandomSource) -> LvState {
        LvState::point(self.params.x0)
    }

    fn log_q0(&self, x: &LvState) -> f64 {
        self.log_pi0(x)
    }

    fn sample_q(&self, n: usize, prev: &LvState, rng: &mut RandomSource) -> LvState {
        let y = self.observation(n);
        let mut from = prev.last();
        let mut slices = SmallVec::with_capacity(self.params.m);
        for j in 0..self.params.m {
            let next = match self.guided(from, y, j) {
                Some(g) => g.sample(rng),
                // Degenerate covariance: the weight of this particle is zero
                // (see `log_weight`), any finite state will do.
                None => from,
            };
            slices.push(next);
            from = next;
        }
        LvState { slices }
    }

    fn log_q(&self, n: usize, prev: &LvState, cur: &LvState) -> f64 {
        let y = self.observation(n);
        let mut from = prev.last();
        let mut total = 0.0;
        for (j, &to) in cur.slices.iter().enumerate() {
            match self.guided(from, y, j) {
                Some(g) => total += g.log_pdf(to),
                None => return f64::NAN,
            }
            from = to;
        }
        total
    }

    fn log_weight_0(&self, x: &LvState) -> f64 {
        if x.last() == self.params.x0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_weight(&self, n: usize, prev: &LvState, cur: &LvState) -> f64 {
        let w = self.log_g(n, cur) + self.log_f(prev, cur) - self.log_q(n, prev, cur);
        if w.is_nan() {
            self.degenerate.fetch_add(1, Ordering::Relaxed);
            f64::NEG_INFINITY
        } else {
            w
        }
    }
}

/// Latent populations at integer times `1..=n` and their noisy observations.
#[derive(Debug, Clone, PartialEq)]
pub struct LvPath {
    pub latent: Vec<Vec2>,
    pub observations: Vec<Vec2>,
}

/// Forward-simulates the Euler dynamics from `x0`; process noise is scaled
/// by `noise_scale` (1 for the model, 0 for the deterministic orbit).
pub fn simulate_lv_path(
    params: &LvParams,
    n_steps: usize,
    noise_scale: f64,
    rng: &mut RandomSource,
) -> Result<LvPath> {
    params.validate()?;
    if n_steps == 0 {
        return Err(Error::InvalidArgument("simulation needs n_steps >= 1".into()));
    }
    let dt = 1.0 / params.m as f64;
    let obs_sd = params.sigma2.sqrt();
    let floor = params.floor;
    let mut x = params.x0;
    let mut latent = Vec::with_capacity(n_steps);
    let mut observations = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        for _ in 0..params.m {
            // Same kernel as the filter's `f`: coefficients at the clamped
            // state, the state itself left unclamped.
            let xc = [x[0].max(floor), x[1].max(floor)];
            let a = lv_drift(xc, params.c);
            let b = mat_scale(mat_add(lv_diffusion(xc, params.c), diag(params.jitter)), dt);
            let z: Vec2 = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let noise = match cholesky(b) {
                Some(l) => mat_vec(l, z),
                None => [0.0, 0.0],
            };
            x = [
                x[0] + a[0] * dt + noise_scale * noise[0],
                x[1] + a[1] * dt + noise_scale * noise[1],
            ];
        }
        let e0: f64 = rng.sample(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        latent.push(x);
        observations.push([x[0] + obs_sd * e0, x[1] + obs_sd * e1]);
    }
    Ok(LvPath { latent, observations })
}

/// Observations `y_1..=y_n` of a freshly simulated trajectory.
pub fn simulate_lv_data(params: &LvParams, n_steps: usize, rng: &mut RandomSource) -> Result<Vec<Vec2>> {
    Ok(simulate_lv_path(params, n_steps, 1.0, rng)?.observations)
}

/// Writes observations as CSV with header `n,y1,y2`, `n` starting at 1.
pub fn write_observations_csv<W: Write>(mut out: W, ys: &[Vec2]) -> std::io::Result<()> {
    writeln!(out, "n,y1,y2")?;
    for (i, y) in ys.iter().enumerate() {
        writeln!(out, "{},{:?},{:?}", i + 1, y[0], y[1])?;
    }
    Ok(())
}

pub fn read_observations_csv<R: BufRead>(input: R) -> Result<Vec<Vec2>> {
    let bad = |line: usize, msg: &str| Error::InvalidArgument(format!("observations line {line}: {msg}"));
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == "n,y1,y2" => {}
        _ => return Err(bad(1, "expected header `n,y1,y2`")),
    }
    let mut ys = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| bad(i + 1, &e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(bad(i + 1, "expected 3 fields"));
        }
        let n: usize = fields[0].parse().map_err(|_| bad(i + 1, "bad step index"))?;
        if n != ys.len() + 1 {
            return Err(bad(i + 1, "step indices must run 1, 2, 3, ..."));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
        ys.push([parse(fields[1])?, parse(fields[2])?]);
    }
    Ok(ys)
}

impl LvParams {
    /// Loads `y_seq` from a `n,y1,y2` CSV file.
    pub fn load_observations(&mut self, path: &Path) -> Result<()> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        self.y_seq = read_observations_csv(std::io::BufReader::new(file))?;
        Ok(())
    }
}
