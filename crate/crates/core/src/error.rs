use thiserror::Error;

/// Errors produced by the simulation and certification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry in {what} at agent {agent}")]
    NonFinite { what: &'static str, agent: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("integration blew up at step {step} (t = {time})")]
    Blowup { step: usize, time: f64 },

    #[error("quadrature tolerance not met: requested {requested:e}, achieved {achieved:e}")]
    Tolerance { requested: f64, achieved: f64 },

    #[error("divergent family: {0}")]
    DivergentFamily(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
