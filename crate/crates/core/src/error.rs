use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parameters that cannot describe a valid tiling, game or experiment.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Correlated sampling did not accept within the configured number of rounds.
    #[error("correlated sampling exhausted its budget of {budget} rounds")]
    SamplingBudget { budget: u64 },

    /// An exact enumeration was requested on an instance that is too large.
    #[error("state space too large: {0}")]
    StateSpaceTooLarge(String),

    /// The surface-area calibration run on the unit cube was too noisy.
    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
