use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A numerical procedure failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A contour or polygon violates a geometric requirement.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// The point cannot be evaluated reliably (too close to a singularity).
    #[error("unevaluable point: {0}")]
    Unevaluable(String),
    /// Bad configuration or command-line input.
    #[error("configuration error: {0}")]
    Config(String),
    /// File-system failure.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
