//! Exact ground truth for finite-state HMMs: the marginal likelihood `Z_n`,
//! the particle filter's second moment `E[(Z_n^N)^2]`, and the i.i.d.-regime
//! constant `C` governing the replicate estimator's relative variance.
//!
//! # Time indexing
//!
//! All second-moment functions take `n` in the Pairs-algorithm convention:
//! `exact_second_moment(spec, N, n)` is the exact expectation of `Xi_n`, the
//! estimate produced after the step-`n` weights (observations `0..=n`). The
//! kernel-product form of the same quantity applies `n + 1` pair kernels
//! (the first one mapping a single initial state to a path segment), which
//! is where the index shift between the two conventions comes from.
//!
//! # Two routes to the second moment
//!
//! Write `R_t(x, y) = g_t(y) f(x, y)` and `S_t(x, y) = (g_t(y) f(x, y))^2 / q_t(x, y)`
//! for the weighted one- and two-copy transitions (`r_0`, `s_0` at time 0).
//!
//! * [`exact_second_moment_tensor`] propagates a measure on ordered state
//!   pairs `(check, hat)`. Each step applies the pair kernel: with weight
//!   `1 - 1/N` both halves move independently through `R_t`; with weight
//!   `1/N` the check half moves through `S_t`, the hat is discarded and the
//!   result lands on the diagonal (the coalescence map).
//! * [`exact_second_moment_epsilon`] enumerates every coalescence pattern
//!   `eps_0..eps_n` explicitly, weighting each by `(1/N)^{#1} (1 - 1/N)^{#0}`.
//!   Between coalescences the two copies are independent given their common
//!   starting point, so each pattern is evaluated with single-copy matrix
//!   products only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::log_sum_exp;

const ROW_SUM_TOL: f64 = 1e-12;
const MAX_TENSOR_WORK: f64 = 1e10;
const MAX_EPSILON_STEPS: usize = 22;

/// An explicit `K`-state HMM with observations baked into `g`.
///
/// `g[n][x]` is `g_n(x)` for `n = 0..=n_max`. `q` holds the proposal
/// matrices for steps `1..=n_max`; a single matrix is reused at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteHmmSpec {
    pub pi0: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub q0: Vec<f64>,
    pub q: Vec<Vec<Vec<f64>>>,
}

impl FiniteHmmSpec {
    /// Bootstrap proposals: `q_0 = pi_0`, `q_n = f`.
    pub fn bootstrap(pi0: Vec<f64>, f: Vec<Vec<f64>>, g: Vec<Vec<f64>>) -> Result<Self> {
        let spec = Self {
            q0: pi0.clone(),
            q: vec![f.clone()],
            pi0,
            f,
            g,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The regime with `q_n = f = pi_0` at every step and time-invariant `g`.
    pub fn iid(g: Vec<f64>, pi0: Vec<f64>, n_max: usize) -> Result<Self> {
        if g.len() != pi0.len() {
            return Err(Error::InvalidSpec(format!(
                "g has {} entries but pi0 has {}",
                g.len(),
                pi0.len()
            )));
        }
        let rows = vec![pi0.clone(); pi0.len()];
        Self::bootstrap(pi0, rows, vec![g; n_max + 1])
    }

    pub fn states(&self) -> usize {
        self.pi0.len()
    }

    /// Last step with an observation.
    pub fn n_max(&self) -> usize {
        self.g.len().saturating_sub(1)
    }

    /// Proposal matrix for step `n >= 1`.
    pub fn q_at(&self, n: usize) -> &[Vec<f64>] {
        if self.q.len() == 1 {
            &self.q[0]
        } else {
            &self.q[n - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.states();
        if k == 0 {
            return Err(Error::InvalidSpec("no states".into()));
        }
        if self.g.is_empty() {
            return Err(Error::InvalidSpec("g must cover at least step 0".into()));
        }
        check_prob_vector("pi0", &self.pi0, k)?;
        check_prob_vector("q0", &self.q0, k)?;
        check_stochastic("f", &self.f, k)?;
        for (n, gn) in self.g.iter().enumerate() {
            if gn.len() != k {
                return Err(Error::InvalidSpec(format!(
                    "g[{n}] has {} entries, expected {k}",
                    gn.len()
                )));
            }
            if let Some(v) = gn.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::InvalidSpec(format!("g[{n}] entry {v} is not in (0, inf)")));
            }
        }
        let n_max = self.n_max();
        if n_max > 0 && self.q.len() != 1 && self.q.len() != n_max {
            return Err(Error::InvalidSpec(format!(
                "q must hold 1 or {n_max} matrices, got {}",
                self.q.len()
            )));
        }
        if n_max > 0 && self.q.is_empty() {
            return Err(Error::InvalidSpec("q is empty".into()));
        }
        for (i, qm) in self.q.iter().enumerate() {
            check_stochastic(&format!("q[{i}]"), qm, k)?;
        }
        for x in 0..k {
            if self.pi0[x] > 0.0 && self.q0[x] <= 0.0 {
                return Err(Error::InvalidSpec(format!("q0[{x}] = 0 where pi0 > 0")));
            }
        }
        for qm in &self.q {
            for (x, (f_row, q_row)) in self.f.iter().zip(qm).enumerate() {
                for (y, (fv, qv)) in f_row.iter().zip(q_row).enumerate() {
                    if *fv > 0.0 && *qv <= 0.0 {
                        return Err(Error::InvalidSpec(format!(
                            "proposal vanishes at ({x}, {y}) where f > 0"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_step(&self, n: usize) -> Result<()> {
        if n > self.n_max() {
            return Err(Error::InvalidArgument(format!(
                "step {n} beyond the spec's last observation {}",
                self.n_max()
            )));
        }
        Ok(())
    }

    fn r0(&self) -> Vec<f64> {
        (0..self.states()).map(|x| self.g[0][x] * self.pi0[x]).collect()
    }

    fn s0(&self) -> Vec<f64> {
        (0..self.states())
            .map(|x| {
                let w = self.g[0][x] * self.pi0[x];
                if w == 0.0 {
                    0.0
                } else {
                    w * w / self.q0[x]
                }
            })
            .collect()
    }

    fn r_mat(&self, t: usize) -> Vec<Vec<f64>> {
        let k = self.states();
        (0..k)
            .map(|x| (0..k).map(|y| self.g[t][y] * self.f[x][y]).collect())
            .collect()
    }

    fn s_mat(&self, t: usize) -> Vec<Vec<f64>> {
        let k = self.states();
        let q = self.q_at(t);
        (0..k)
            .map(|x| {
                (0..k)
                    .map(|y| {
                        let w = self.g[t][y] * self.f[x][y];
                        if w == 0.0 {
                            0.0
                        } else {
                            w * w / q[x][y]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn check_prob_vector(name: &str, v: &[f64], k: usize) -> Result<()> {
    if v.len() != k {
        return Err(Error::InvalidSpec(format!(
            "{name} has {} entries, expected {k}",
            v.len()
        )));
    }
    if v.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidSpec(format!(
            "{name} has a negative or non-finite entry"
        )));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidSpec(format!("{name} sums to {s}")));
    }
    Ok(())
}

fn check_stochastic(name: &str, m: &[Vec<f64>], k: usize) -> Result<()> {
    if m.len() != k {
        return Err(Error::InvalidSpec(format!(
            "{name} has {} rows, expected {k}",
            m.len()
        )));
    }
    for (i, row) in m.iter().enumerate() {
        check_prob_vector(&format!("{name} row {i}"), row, k)?;
    }
    Ok(())
}

/// Divides `v` by its largest entry and returns the log of that factor.
fn rescale(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return f64::NEG_INFINITY;
    }
    v.iter_mut().for_each(|x| *x /= max);
    max.ln()
}

fn vec_mat(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let k = m[0].len();
    let mut out = vec![0.0; k];
    for (vi, row) in v.iter().zip(m) {
        if *vi == 0.0 {
            continue;
        }
        for (o, mij) in out.iter_mut().zip(row) {
            *o += vi * mij;
        }
    }
    out
}

/// `log Z_n` by the forward recursion.
pub fn exact_marginal_likelihood(spec: &FiniteHmmSpec, n: usize) -> Result<f64> {
    spec.validate()?;
    spec.check_step(n)?;
    let k = spec.states();
    let mut pred = spec.pi0.clone();
    let mut log_z = 0.0;
    for t in 0..=n {
        if t > 0 {
            pred = vec_mat(&pred, &spec.f);
        }
        let mut joint: Vec<f64> = (0..k).map(|x| pred[x] * spec.g[t][x]).collect();
        let mass: f64 = joint.iter().sum();
        log_z += mass.ln();
        joint.iter_mut().for_each(|v| *v /= mass);
        pred = joint;
    }
    Ok(log_z)
}

fn mixture_coefficients(n_particles: usize) -> Result<(f64, f64)> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let shared = 1.0 / n_particles as f64;
    Ok((shared, 1.0 - shared))
}

/// `log E[(Z_n^N)^2]` by forward propagation of the pair measure.
pub fn exact_second_moment_tensor(spec: &FiniteHmmSpec, n_particles: usize, n: usize) -> Result<f64> {
    spec.validate()?;
    spec.check_step(n)?;
    let (shared, distinct) = mixture_coefficients(n_particles)?;
    let k = spec.states();
    let work = (k as f64).powi(4) * (n as f64 + 1.0);
    if work > MAX_TENSOR_WORK {
        return Err(Error::Capacity(format!(
            "pair-measure recursion needs ~{work:.1e} operations (K = {k}, n = {n})"
        )));
    }

    // nu[x * k + y]: mass on (check = x, hat = y) after weighting and coalescence.
    let r0 = spec.r0();
    let s0 = spec.s0();
    let mut nu = vec![0.0; k * k];
    for x in 0..k {
        for y in 0..k {
            nu[x * k + y] = distinct * r0[x] * r0[y];
        }
        nu[x * k + x] += shared * s0[x];
    }
    let mut log_scale = rescale(&mut nu);

    for t in 1..=n {
        let r = spec.r_mat(t);
        let s = spec.s_mat(t);
        let mut next = vec![0.0; k * k];
        for x in 0..k {
            for y in 0..k {
                let mass = nu[x * k + y];
                if mass == 0.0 {
                    continue;
                }
                for xn in 0..k {
                    let a = distinct * mass * r[x][xn];
                    if a == 0.0 {
                        continue;
                    }
                    for yn in 0..k {
                        next[xn * k + yn] += a * r[y][yn];
                    }
                }
            }
        }
        for x in 0..k {
            let row: f64 = nu[x * k..(x + 1) * k].iter().sum();
            if row == 0.0 {
                continue;
            }
            for xn in 0..k {
                next[xn * k + xn] += shared * row * s[x][xn];
            }
        }
        nu = next;
        log_scale += rescale(&mut nu);
    }
    let total: f64 = nu.iter().sum();
    Ok(log_scale + total.ln())
}

/// One copy-pair segment between coalescence events. Row `j` of `check`
/// and `hat` is the (scaled) measure of each copy started from source point
/// `j`; both copies share the source, so they are kept per source.
struct Segment {
    log_source: Vec<f64>,
    check: Vec<Vec<f64>>,
    hat: Vec<Vec<f64>>,
    /// Log of the factor removed from every check-times-hat product.
    log_scale: f64,
}

impl Segment {
    fn from_prior(r0: &[f64]) -> Self {
        let mut seg = Self {
            log_source: vec![0.0],
            check: vec![r0.to_vec()],
            hat: vec![r0.to_vec()],
            log_scale: 0.0,
        };
        seg.rescale();
        seg
    }

    fn from_coalesced(log_source: Vec<f64>) -> Self {
        let k = log_source.len();
        let identity: Vec<Vec<f64>> = (0..k)
            .map(|j| (0..k).map(|y| if y == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            log_source,
            check: identity.clone(),
            hat: identity,
            log_scale: 0.0,
        }
    }

    fn rescale(&mut self) {
        let max = self
            .check
            .iter()
            .chain(&self.hat)
            .flat_map(|row| row.iter().copied())
            .fold(0.0, f64::max);
        if max == 0.0 {
            self.log_scale = f64::NEG_INFINITY;
            return;
        }
        for row in self.check.iter_mut().chain(self.hat.iter_mut()) {
            row.iter_mut().for_each(|v| *v /= max);
        }
        self.log_scale += 2.0 * max.ln();
    }

    /// Both copies move independently through `r`.
    fn advance(&mut self, r: &[Vec<f64>]) {
        for row in self.check.iter_mut().chain(self.hat.iter_mut()) {
            *row = vec_mat(row, r);
        }
        self.rescale();
    }

    /// The check copy moves through `s`, the hat copy is dropped (its
    /// proposal integrates to one), and the mass lands on the diagonal.
    fn coalesce(&self, s: &[Vec<f64>]) -> Vec<f64> {
        let k = s[0].len();
        let mut terms: Vec<Vec<f64>> = vec![Vec::with_capacity(self.check.len()); k];
        for ((check, hat), &ls) in self.check.iter().zip(&self.hat).zip(&self.log_source) {
            if ls == f64::NEG_INFINITY {
                continue;
            }
            let hat_mass: f64 = hat.iter().sum();
            for (y, m) in vec_mat(check, s).into_iter().enumerate() {
                terms[y].push(ls + (m * hat_mass).ln());
            }
        }
        terms
            .iter()
            .map(|t| {
                if t.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    log_sum_exp(t).unwrap_or(f64::NEG_INFINITY) + self.log_scale
                }
            })
            .collect()
    }

    fn total(&self) -> f64 {
        let terms: Vec<f64> = self
            .check
            .iter()
            .zip(&self.hat)
            .zip(&self.log_source)
            .map(|((c, h), &ls)| ls + (c.iter().sum::<f64>() * h.iter().sum::<f64>()).ln())
            .collect();
        log_sum_exp(&terms).unwrap_or(f64::NEG_INFINITY) + self.log_scale
    }
}

/// `log E[(Z_n^N)^2]` as an explicit sum over all `2^(n+1)` coalescence
/// patterns.
pub fn exact_second_moment_epsilon(spec: &FiniteHmmSpec, n_particles: usize, n: usize) -> Result<f64> {
    spec.validate()?;
    spec.check_step(n)?;
    if n + 1 > MAX_EPSILON_STEPS {
        return Err(Error::Capacity(format!(
            "2^{} coalescence patterns exceed the enumeration budget of 2^{MAX_EPSILON_STEPS}",
            n + 1
        )));
    }
    let (shared, distinct) = mixture_coefficients(n_particles)?;
    let (ln_shared, ln_distinct) = (shared.ln(), distinct.ln());
    let r0 = spec.r0();
    let s0_log: Vec<f64> = spec.s0().iter().map(|v| v.ln()).collect();
    let r: Vec<_> = (1..=n).map(|t| spec.r_mat(t)).collect();
    let s: Vec<_> = (1..=n).map(|t| spec.s_mat(t)).collect();

    let mut terms = Vec::with_capacity(1 << (n + 1));
    for pattern in 0u64..(1u64 << (n + 1)) {
        let coalesced_at = |t: usize| pattern >> t & 1 == 1;
        let ones = pattern.count_ones() as usize;
        let zeros = n + 1 - ones;
        // 0 * ln(0) must count as zero, not NaN, when N = 1.
        let log_prob = if zeros == 0 {
            0.0
        } else {
            zeros as f64 * ln_distinct
        } + ones as f64 * ln_shared;
        if log_prob == f64::NEG_INFINITY {
            continue;
        }
        let mut seg = if coalesced_at(0) {
            Segment::from_coalesced(s0_log.clone())
        } else {
            Segment::from_prior(&r0)
        };
        for t in 1..=n {
            if coalesced_at(t) {
                seg = Segment::from_coalesced(seg.coalesce(&s[t - 1]));
            } else {
                seg.advance(&r[t - 1]);
            }
        }
        terms.push(log_prob + seg.total());
    }
    log_sum_exp(&terms)
}

/// `log E[(Z_n^N)^2]`, the exact expectation of `Xi_n^(N,M)` for any `M`.
pub fn exact_second_moment(spec: &FiniteHmmSpec, n_particles: usize, n: usize) -> Result<f64> {
    exact_second_moment_tensor(spec, n_particles, n)
}

/// `Var[Z_n^N] / Z_n^2`.
pub fn exact_relative_variance(spec: &FiniteHmmSpec, n_particles: usize, n: usize) -> Result<f64> {
    let m2 = exact_second_moment(spec, n_particles, n)?;
    let lz = exact_marginal_likelihood(spec, n)?;
    Ok((m2 - 2.0 * lz).exp_m1())
}

/// `C = E[S^4] / E[S^2]^2` where `S` is the mean of `N` i.i.d. draws of
/// `g(X)`, `X ~ pi0`.
pub fn iid_moment_ratio(g: &[f64], pi0: &[f64], n_particles: usize) -> Result<f64> {
    if g.len() != pi0.len() || g.is_empty() {
        return Err(Error::InvalidArgument(
            "g and pi0 must be non-empty with equal lengths".into(),
        ));
    }
    if n_particles == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let raw = |k: i32| -> f64 { g.iter().zip(pi0).map(|(gx, p)| p * gx.powi(k)).sum() };
    let (m1, m2, m3, m4) = (raw(1), raw(2), raw(3), raw(4));
    let n = n_particles as f64;
    // Moments of the sum T = N S; the N^4 factors cancel in the ratio.
    let t2 = n * m2 + n * (n - 1.0) * m1 * m1;
    let t4 = n * m4
        + 4.0 * n * (n - 1.0) * m3 * m1
        + 3.0 * n * (n - 1.0) * m2 * m2
        + 6.0 * n * (n - 1.0) * (n - 2.0) * m2 * m1 * m1
        + n * (n - 1.0) * (n - 2.0) * (n - 3.0) * m1.powi(4);
    Ok(t4 / (t2 * t2))
}

/// [`iid_moment_ratio`] for a spec in the i.i.d. regime (`q_0 = pi_0`,
/// every row of `f` and `q_n` equal to `pi_0`, time-invariant `g`).
pub fn iid_case_c(spec: &FiniteHmmSpec, n_particles: usize) -> Result<f64> {
    spec.validate()?;
    let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ROW_SUM_TOL);
    let pi0 = &spec.pi0;
    let iid = same(&spec.q0, pi0)
        && spec.f.iter().all(|row| same(row, pi0))
        && spec.q.iter().flatten().all(|row| same(row, pi0))
        && spec.g.iter().all(|gn| same(gn, &spec.g[0]));
    if !iid {
        return Err(Error::InvalidSpec(
            "spec is not in the i.i.d. regime (q = f = pi0, constant g)".into(),
        ));
    }
    iid_moment_ratio(&spec.g[0], pi0, n_particles)
}
