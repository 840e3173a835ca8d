//! Concrete state-space models: the AR(1) and Lotka-Volterra experiments,
//! plus finite-state toys that the oracle can solve exactly.

mod ar1;
mod finite;
mod gauss;
mod iid;
mod lv;

pub use ar1::{make_ar1, Ar1Model, Ar1Params};
pub use finite::{make_finite_toy, FiniteModel};
pub use iid::{make_iid_toy, IidToy};
pub use lv::{
    lv_diffusion, lv_drift, make_lv, read_observations_csv, simulate_lv_data, simulate_lv_path,
    write_observations_csv, LvModel, LvParams, LvPath, LvState, Mat2, Vec2,
};

/// Constant-likelihood model: `g_n = c` for every state and step, bootstrap
/// proposals over two states. `Z_n^N` is deterministic.
pub fn constant_likelihood(c: f64, n_max: usize) -> crate::Result<FiniteModel> {
    let spec = crate::oracle::FiniteHmmSpec::bootstrap(
        vec![0.3, 0.7],
        vec![vec![0.6, 0.4], vec![0.2, 0.8]],
        vec![vec![c, c]; n_max + 1],
    )?;
    make_finite_toy(spec)
}
