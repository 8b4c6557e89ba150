use thiserror::Error;

/// Errors raised by the pricing, simulation and diagnostic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("jump of log-size {z} leaves the predefault domain (default)")]
    JumpCausesDefault { z: f64 },

    #[error("wrong moneyness: {0}")]
    Moneyness(String),

    #[error("at-the-money strike {strike} is not covered by the off-the-money expansions")]
    AtTheMoney { strike: f64 },

    #[error("no implied volatility: {0}")]
    NoSolution(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: estimate {value:e} with error {error:e} after {intervals} intervals")]
    Quadrature {
        value: f64,
        error: f64,
        intervals: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
