use thiserror::Error;

/// Errors raised by the simulation and analysis toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid dimension {0}: every mode needs at least 2 levels")]
    InvalidDimension(usize),

    #[error("duplicate mode label `{0}`")]
    DuplicateLabel(String),

    #[error("unknown mode label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "truncation guard: |alpha|^2 = {alpha_sq:.4} exceeds dim/4 = {limit:.4} \
         (unitarity defect {defect:.3e})"
    )]
    Truncation { alpha_sq: f64, limit: f64, defect: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration failed at t = {time} us: {reason}")]
    Integration { time: f64, reason: String },

    #[error("trace drift {drift:.3e} at t = {time} us exceeds the 1e-6 hard limit")]
    TraceDrift { time: f64, drift: f64 },

    #[error("fit did not converge: {reason} (residual norm {residual:.3e})")]
    FitFailed { reason: String, residual: f64 },

    #[error("reconstruction grid violates bound: {0}")]
    Reconstruction(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
