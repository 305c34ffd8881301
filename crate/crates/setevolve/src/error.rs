//! Crate-wide error type.

use crate::glasso::PrecisionEstimate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// No timestamp falls within the kernel bandwidth of the query point.
    #[error("empty kernel window at t = {t}")]
    EmptyWindow { t: f64 },

    /// The solver ran out of sweeps before certifying optimality. Carries the
    /// last iterate and its duality gap so callers can inspect how close it got.
    #[error("solver did not converge: duality gap {gap:.3e} after {iterations} sweeps")]
    NonConvergence {
        estimate: Box<PrecisionEstimate>,
        gap: f64,
        iterations: usize,
    },

    /// An error raised while estimating the network at one timestamp.
    #[error("at timestamp {t}: {source}")]
    AtTimestamp {
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn at_timestamp(t: f64, source: Error) -> Self {
        Error::AtTimestamp {
            t,
            source: Box::new(source),
        }
    }
}
