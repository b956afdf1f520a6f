use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("particle number mismatch: expected {expected}, found {found}")]
    ParticleMismatch { expected: usize, found: usize },

    #[error("orbital is not normalized (quadrature norm {norm})")]
    Unnormalized { norm: f64 },

    #[error("orbitals are not orthogonal (overlap {overlap})")]
    NotOrthogonal { overlap: f64 },

    #[error("state would need {amplitudes} amplitudes, above the limit of {limit} (2^27)")]
    MemoryGuard { amplitudes: u128, limit: usize },

    #[error("symmetric component vanishes (norm {norm})")]
    ZeroSymmetricComponent { norm: f64 },

    #[error("particle index {index} out of range 1..={particles}")]
    IndexOutOfRange { index: usize, particles: usize },

    #[error("brute-force oracle limited to N <= 5 and M <= 6 (got N = {particles}, M = {points})")]
    ScaleGuard { particles: usize, points: usize },

    #[error("matrix is not Hermitian (deviation {deviation})")]
    NonHermitian { deviation: f64 },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("sample times are not strictly increasing")]
    UnsortedTimes,

    #[error("non-finite value encountered at step {step}")]
    NumericalAbort { step: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
