//! Experiment harness for the fraclod multiscale toolkit: JSON-configured
//! drivers that reproduce the library's reference studies at configurable
//! scale, emitting CSV tables and static SVG plots.

// Indexed loops and NaN-rejecting negated comparisons are deliberate in
// the numeric kernels.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod drivers;
pub mod geometry;
pub mod svg;
pub mod table;

use thiserror::Error;

/// Driver errors, split by exit code: configuration problems exit with 2,
/// numerical failures with 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
