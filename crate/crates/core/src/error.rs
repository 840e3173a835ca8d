use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input where at least one value is required")]
    EmptyInput,

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    /// Every importance weight vanished; the particle population died out.
    #[error("all weights are zero{}", step_suffix(*.step))]
    DegenerateWeights { step: Option<usize> },

    /// Coalescence probability undefined because both halves of a pair have zero weight.
    #[error("pair {pair} has zero weight in both halves at step {step}")]
    DegeneratePair { step: usize, pair: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid finite HMM specification: {0}")]
    InvalidSpec(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("model has observations up to step {available}, run requested step {requested}")]
    Horizon { requested: usize, available: usize },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!(" at step {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::DegenerateWeights { step: None } => Error::DegenerateWeights { step: Some(step) },
            other => other,
        }
    }

    /// True for failures caused by weight degeneracy (as opposed to bad input).
    pub fn is_degenerate(&self) -> bool {
        match self {
            Error::DegenerateWeights { .. } | Error::DegeneratePair { .. } => true,
            Error::Replicate { source, .. } => source.is_degenerate(),
            _ => false,
        }
    }
}
