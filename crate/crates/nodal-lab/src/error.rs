//! Crate-wide error type.
//!
//! Numerical failure modes are explicit variants so callers can distinguish
//! "the input was bad" from "the computation could not certify its result".

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {message} (got {value})")]
    InvalidParameter {
        name: &'static str,
        message: String,
        value: String,
    },

    #[error("domain error in {operation}: {message}")]
    Domain {
        operation: &'static str,
        message: String,
    },

    #[error("ODE integration failed at r = {r}: {message}")]
    IntegrationFailure { r: f64, message: String },

    #[error("no sign change on bracket [{lo}, {hi}] for {operation}")]
    BracketError {
        operation: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("shooting failed after {iterations} iterations: {message}")]
    ShootingFailure { iterations: usize, message: String },

    #[error("search failed in {operation}: {message}")]
    SearchFailure {
        operation: &'static str,
        message: String,
    },

    #[error("invariant violated: {message}")]
    InvariantViolation { message: String },

    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e} after {n_evals} evaluations")]
    QuadratureFailure {
        requested: f64,
        achieved: f64,
        n_evals: u64,
    },

    #[error("convergence warning in {operation}: {message}")]
    ConvergenceWarning {
        operation: &'static str,
        message: String,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn invalid(name: &'static str, value: impl std::fmt::Display, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
            value: value.to_string(),
        }
    }

    pub fn io(path: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
