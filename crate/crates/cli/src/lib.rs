//! Configuration-driven experiments for probabilistic shaping designs over a
//! visible-light wiretap channel.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod validate;

pub use config::{default_paper_config, ExperimentConfig, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible design: {0}")]
    Infeasible(String),
    #[error("validation mismatch: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Validation(_) => 4,
            Self::Numeric(_) | Self::Io(_) => 1,
        }
    }
}
