// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or out-of-contract input (unknown label, negative exponent, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parameters outside the domain of a formula (artanh argument, log sign, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Subdivision budget exhausted before the requested tolerance was met.
    /// Carries the best estimate reached so callers may still report it.
    #[error("quadrature budget exhausted: best estimate {estimate:e} ± {err_est:e}")]
    Quadrature { estimate: f64, err_est: f64 },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
