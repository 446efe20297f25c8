use thiserror::Error;

/// Errors raised by the reservoir, dynamics and analysis layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid configuration (dimensions, parameter ranges).
    #[error("config error: {0}")]
    Config(String),

    /// A numerical procedure failed (root bracket, eigensolver, fit).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The ODE integrator could not continue. `t` is the time of the last
    /// accepted step and `state` the packed state at that time.
    #[error("integration error at t = {t}: {message}")]
    Integration {
        t: f64,
        message: String,
        state: Vec<f64>,
    },

    /// A monitored invariant was violated beyond its tolerance.
    #[error("invariant violated at t = {t}: {message}")]
    Invariant { t: f64, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
