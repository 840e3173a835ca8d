//! Fixtures shared by the benchmarks.

use pairs_core::models::{
    make_ar1, make_finite_toy, make_lv, simulate_lv_data, Ar1Model, Ar1Params, FiniteModel,
};
use pairs_core::models::{LvModel, LvParams};
use pairs_core::{derive_stream, FiniteHmmSpec};

pub fn ar1() -> Ar1Model {
    make_ar1(Ar1Params::default()).expect("default AR(1) parameters are valid")
}

/// LV model with `n_steps` observations simulated from seed 0.
pub fn lv(n_steps: usize) -> LvModel {
    let mut params = LvParams::default();
    params.y_seq = simulate_lv_data(&params, n_steps, &mut derive_stream(0, 0)).expect("simulation");
    make_lv(params).expect("default LV parameters are valid")
}

/// `k`-state bootstrap HMM with smoothly varying likelihoods up to `n_max`.
pub fn finite_spec(k: usize, n_max: usize) -> FiniteHmmSpec {
    let uniform = vec![1.0 / k as f64; k];
    let f = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { 0.5 } else { 0.5 / (k - 1) as f64 })
                .collect()
        })
        .collect();
    let g = (0..=n_max)
        .map(|n| (0..k).map(|x| 1.0 + 0.5 * ((n + x) as f64).sin()).collect())
        .collect();
    FiniteHmmSpec::bootstrap(uniform, f, g).expect("valid spec")
}

pub fn finite(k: usize, n_max: usize) -> FiniteModel {
    make_finite_toy(finite_spec(k, n_max)).expect("valid spec")
}
