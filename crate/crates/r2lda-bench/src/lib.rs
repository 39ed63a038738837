//! Experiment harness for the r2lda classifier family: multi-trial
//! training/testing loops over classifier × training size × noise level,
//! error-rate aggregation with per-cell deterministic seeding, runtime
//! measurement, and CSV emission for external plotting.

// `!(x >= 0.0)` guards reject NaN along with negative values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod model_io;
pub mod report;
pub mod runner;
pub mod timing;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("trial failed: {0}")]
    Trial(String),

    #[error(transparent)]
    Core(#[from] r2lda::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
