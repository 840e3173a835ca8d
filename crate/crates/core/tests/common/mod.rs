//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

use pairs_core::{derive_stream, FiniteHmmSpec};
use rand::Rng;

/// Three-state HMM with a proposal that differs from the signal kernel,
/// observed at steps `0..=6`.
pub fn toy_spec() -> FiniteHmmSpec {
    FiniteHmmSpec {
        pi0: vec![0.5, 0.3, 0.2],
        f: vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.2], vec![0.1, 0.3, 0.6]],
        g: vec![
            vec![1.2, 0.4, 0.9],
            vec![0.3, 1.5, 0.8],
            vec![1.1, 1.0, 0.2],
            vec![0.6, 0.6, 1.7],
            vec![1.4, 0.2, 0.5],
            vec![0.9, 1.3, 0.4],
            vec![0.5, 0.8, 1.6],
        ],
        q0: vec![0.4, 0.4, 0.2],
        q: vec![vec![
            vec![0.4, 0.3, 0.3],
            vec![0.3, 0.4, 0.3],
            vec![0.3, 0.3, 0.4],
        ]],
    }
}

/// Random `k`-state spec with a step-dependent proposal and observations
/// at `0..=n_max`.
pub fn random_spec(k: usize, n_max: usize, seed: u64) -> FiniteHmmSpec {
    let mut rng = derive_stream(seed, 0x5bec);
    let prob = |rng: &mut pairs_core::RandomSource| {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let pi0 = prob(&mut rng);
    let q0 = prob(&mut rng);
    let f = (0..k).map(|_| prob(&mut rng)).collect();
    let q = (0..n_max.max(1))
        .map(|_| (0..k).map(|_| prob(&mut rng)).collect())
        .collect();
    let g = (0..=n_max)
        .map(|_| (0..k).map(|_| rng.random_range(0.05..2.5)).collect())
        .collect();
    let spec = FiniteHmmSpec { pi0, f, g, q0, q };
    spec.validate().expect("random spec is valid");
    spec
}

/// `exp(log_values - log_reference)`, the sample rescaled so that its
/// expectation is 1 when `log_reference` is the exact log-mean.
pub fn rescaled(log_values: impl IntoIterator<Item = f64>, log_reference: f64) -> Vec<f64> {
    log_values
        .into_iter()
        .map(|v| (v - log_reference).exp())
        .collect()
}
