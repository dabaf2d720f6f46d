use thiserror::Error;

/// Errors raised by the solvers, codecs and simulators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("iteration did not converge after {iterations} steps (last step {last_step:.3e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error("inner Riccati term is numerically singular")]
    SingularInnerTerm,

    #[error("matrix is numerically singular")]
    Singular,

    #[error("Lyapunov map is not stable (spectral radius {radius})")]
    UnstableM { radius: f64 },

    #[error("closed loop is not stable (spectral radius {radius})")]
    Unstabilizable { radius: f64 },

    #[error("lifted two-step realization is not stable (spectral radius {radius})")]
    UnstableLift { radius: f64 },

    #[error("lifted noise covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteNoise { min_eigenvalue: f64 },

    #[error("innovation covariance is numerically singular")]
    SingularInnovation,

    #[error("quantizer index {index} outside [0, {max}]")]
    IndexOutOfRange { index: u64, max: u64 },

    #[error("bit range error: {0}")]
    BitRange(String),

    #[error("filter called out of phase: expected {expected} step")]
    Parity { expected: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value outside domain: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
