//! Pipeline plumbing behind the `latentpatch` binary: corpus synthesis,
//! corrupt/recover/score machinery, and the subcommand implementations.
//! Everything here is callable as a library so tests can drive the exact
//! code paths the binary runs.

use std::fmt;

pub mod commands;
pub mod config;
pub mod corpus;
pub mod pipeline;
pub mod svg;

/// One error family per process exit code: usage problems exit 1, broken
/// or inconsistent data exits 2. A failing flowcheck is not an error, the
/// command reports it and `main` exits 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Data(msg) => write!(f, "data error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::tensor::TensorError> for CliError {
    fn from(e: latentpatch_core::tensor::TensorError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::fileio::FileError> for CliError {
    fn from(e: latentpatch_core::fileio::FileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::packet::PacketError> for CliError {
    fn from(e: latentpatch_core::packet::PacketError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::inpaint::InpaintError> for CliError {
    fn from(e: latentpatch_core::inpaint::InpaintError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::lowrank::LowRankError> for CliError {
    fn from(e: latentpatch_core::lowrank::LowRankError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::metrics::MetricError> for CliError {
    fn from(e: latentpatch_core::metrics::MetricError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<latentpatch_core::flow::FlowError> for CliError {
    fn from(e: latentpatch_core::flow::FlowError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
