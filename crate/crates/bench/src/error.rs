use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("need at least 3 trials, got {0}")]
    TooFewTrials(usize),
    #[error("lengths must be ascending and at least 1")]
    Lengths,
    #[error("comparison needs at least 2 systems over the same lengths")]
    Incomparable,
    #[error(transparent)]
    Core(#[from] jnrf_core::CoreError),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
