use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse spec at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid impulse control: {0}")]
    InvalidControl(String),

    #[error("integration produced a non-finite state at t = {t}")]
    Integration { t: f64 },

    #[error("enumeration budget exceeded: about {estimate:.3e} cost evaluations (limit {limit:.0e})")]
    BudgetExceeded { estimate: f64, limit: f64 },

    #[error("policy synthesis stopped at t = {t}: {reason}")]
    SynthesisIncomplete {
        t: f64,
        reason: String,
        partial: crate::dynamics::ImpulseControl,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
