//! Sequential Monte Carlo estimation of marginal likelihoods together with
//! the Pairs algorithm, which estimates the second moment `E[(Z_n^N)^2]` of
//! the particle filter's estimate without bias at `O(M)` cost per step.
//!
//! * [`filter`]: the particle filter, producing `log Z_n^N`.
//! * [`pairs`]: the Pairs algorithm, producing `log Xi_n^(N,M)`.
//! * [`estimators`]: replicate runs, the i.i.d. second-moment baseline, and
//!   the MC and Pairs variance-reporting strategies.
//! * [`oracle`]: exact values for finite-state models.
//! * [`models`]: AR(1), Lotka-Volterra, and finite toys.
//! * [`stats`]: sample summaries used by the statistical checks.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod filter;
pub mod model;
pub mod models;
pub mod numerics;
pub mod oracle;
pub mod pairs;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{
    iid_second_moment, mc_strategy, pairs_strategy, run_pairs_replicates, run_replicates, ReplicateBatch,
    ReplicateSet, Strategy, VarianceReport,
};
pub use filter::{pf_run, LogZTrajectory, ParticleSystem, Trajectory};
pub use model::StateSpaceModel;
pub use oracle::FiniteHmmSpec;
pub use pairs::{pairs_run, LogXiTrajectory, PairParticle, PairSystem};
pub use rng::{derive_stream, RandomSource};
