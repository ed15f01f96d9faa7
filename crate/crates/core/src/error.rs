use thiserror::Error;

/// Errors raised by the simulators, likelihoods and samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A query fell outside the domain on which an object is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter is out of its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inputs of incompatible shape or content were combined.
    #[error("usage error: {0}")]
    Usage(String),

    /// Observed data violate a structural requirement.
    #[error("data error: {0}")]
    Data(String),

    /// A factorization or other numerical routine failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A sampler could not find a valid starting state.
    #[error("initialization failed: {0}")]
    Initialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
