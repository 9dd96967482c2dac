use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced overflow or non-finite values.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// The coupled function is not an element of the finite-level domain of the coupled generator.
    #[error("coupled function is not in the generator domain: {0}")]
    NotInDomain(String),

    /// The partial-fraction CDF lost too many digits to cancellation.
    #[error(
        "catastrophic cancellation in hypoexponential CDF at t={t}: term magnitude ratio {ratio:.3e}; \
         reduce the truncation level or use the Monte Carlo estimator"
    )]
    Cancellation { t: f64, ratio: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
