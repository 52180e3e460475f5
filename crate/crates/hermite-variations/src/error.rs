use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps [`Error::Domain`], [`Error::Unsupported`] and
/// [`Error::Config`] to exit code 2, and [`Error::Capacity`] /
/// [`Error::Covariance`] / [`Error::Io`] to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request exceeds a configured capacity cap.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// An operation is not defined for the requested arity or regime.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The covariance structure is numerically unusable.
    #[error("covariance error: {0}")]
    Covariance(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn covariance(msg: impl Into<String>) -> Self {
        Error::Covariance(msg.into())
    }
}
