use thiserror::Error;

/// Errors raised by the shaping library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{routine} did not converge: {detail}")]
    NonConvergence { routine: &'static str, detail: String },

    #[error("probability {value:e} at index {index} is below the active-support floor {floor:e}")]
    BelowSupportFloor { index: usize, value: f64, floor: f64 },

    #[error("eavesdropper link is not degraded: h_B/sigma_B = {bob:e} < h_E/sigma_E = {eve:e}")]
    NotDegraded { bob: f64, eve: f64 },

    #[error("constraint set is empty: {0}")]
    Infeasible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
