//! The state-space model contract shared by the particle filter and the
//! Pairs algorithm.
//!
//! A model owns its observation sequence; `log_g(n, x)` is the log
//! likelihood of the step-`n` observation given state `x`. Every density is
//! exposed in log form only.

use std::fmt::Debug;

use crate::rng::RandomSource;

pub trait StateSpaceModel: Send + Sync {
    type State: Clone + Debug + Send + Sync;

    /// Dimension of one state; integer-coded finite models report 1.
    fn state_dim(&self) -> usize;

    /// Last step index with an observation, or `None` when unbounded.
    fn horizon(&self) -> Option<usize> {
        None
    }

    fn log_pi0(&self, x: &Self::State) -> f64;

    fn log_f(&self, prev: &Self::State, cur: &Self::State) -> f64;

    fn log_g(&self, n: usize, x: &Self::State) -> f64;

    fn sample_q0(&self, rng: &mut RandomSource) -> Self::State;

    fn log_q0(&self, x: &Self::State) -> f64;

    /// Draw the step-`n` state (`n >= 1`) given the step-`n-1` state.
    fn sample_q(&self, n: usize, prev: &Self::State, rng: &mut RandomSource) -> Self::State;

    fn log_q(&self, n: usize, prev: &Self::State, cur: &Self::State) -> f64;

    /// `log g_0(x) + log pi_0(x) - log q_0(x)`.
    fn log_weight_0(&self, x: &Self::State) -> f64 {
        self.log_g(0, x) + self.log_pi0(x) - self.log_q0(x)
    }

    /// `log g_n(cur) + log f(prev, cur) - log q_n(prev, cur)` for `n >= 1`.
    fn log_weight(&self, n: usize, prev: &Self::State, cur: &Self::State) -> f64 {
        self.log_g(n, cur) + self.log_f(prev, cur) - self.log_q(n, prev, cur)
    }
}

/// Errors out when `n_steps` reaches past the model's observations.
pub(crate) fn check_horizon<M: StateSpaceModel + ?Sized>(model: &M, n_steps: usize) -> crate::Result<()> {
    match model.horizon() {
        Some(available) if n_steps > available => Err(crate::Error::Horizon {
            requested: n_steps,
            available,
        }),
        _ => Ok(()),
    }
}

impl<M: StateSpaceModel + ?Sized> StateSpaceModel for &M {
    type State = M::State;

    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn horizon(&self) -> Option<usize> {
        (**self).horizon()
    }
    fn log_pi0(&self, x: &Self::State) -> f64 {
        (**self).log_pi0(x)
    }
    fn log_f(&self, prev: &Self::State, cur: &Self::State) -> f64 {
        (**self).log_f(prev, cur)
    }
    fn log_g(&self, n: usize, x: &Self::State) -> f64 {
        (**self).log_g(n, x)
    }
    fn sample_q0(&self, rng: &mut RandomSource) -> Self::State {
        (**self).sample_q0(rng)
    }
    fn log_q0(&self, x: &Self::State) -> f64 {
        (**self).log_q0(x)
    }
    fn sample_q(&self, n: usize, prev: &Self::State, rng: &mut RandomSource) -> Self::State {
        (**self).sample_q(n, prev, rng)
    }
    fn log_q(&self, n: usize, prev: &Self::State, cur: &Self::State) -> f64 {
        (**self).log_q(n, prev, cur)
    }
    fn log_weight_0(&self, x: &Self::State) -> f64 {
        (**self).log_weight_0(x)
    }
    fn log_weight(&self, n: usize, prev: &Self::State, cur: &Self::State) -> f64 {
        (**self).log_weight(n, prev, cur)
    }
}
