use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported moment order {0} (only 1 and 2 are available)")]
    UnsupportedMoment(u32),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// The asymptotic variance approximation produced a non-positive value.
    #[error("variance approximation broke down for K = {k}: eta + eta' = {value}")]
    ApproximationBreakdown { k: usize, value: f64 },

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("moment cache I/O: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
