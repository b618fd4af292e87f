use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The legitimate correlation does not exceed the squared eavesdropper
    /// correlation, so no secret bits can be extracted.
    #[error("no extractable secrecy: rho_l = {rho_l} <= rho_e^2 = {rho_e_sq}")]
    NoSecrecy { rho_l: f64, rho_e_sq: f64 },

    /// A noiseless legitimate link makes the key rate unbounded.
    #[error("rho_l = {0} is not below 1: key rate is unbounded")]
    PerfectCorrelation(f64),

    #[error(
        "slot allocation did not converge within {iterations} iterations \
         (last Q = {last_q}, last Q* = {last_q_star})"
    )]
    NoConvergence {
        iterations: usize,
        last_q: usize,
        last_q_star: usize,
    },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
