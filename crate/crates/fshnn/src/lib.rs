//! File formats, experiment configuration and the `fshnn` command line on
//! top of `fshnn-core`.

pub mod cli;
pub mod config;
pub mod container;
pub mod experiment;
pub mod files;
pub mod table;

use std::path::Path;

use thiserror::Error;

pub use config::ExperimentConfig;

/// Anything that stops a command after its arguments were accepted.
#[derive(Debug, Error)]
pub enum Failure {
    #[error(transparent)]
    Core(#[from] fshnn_core::Error),
    #[error(transparent)]
    Container(#[from] container::ContainerError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

impl Failure {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn format(path: &Path, message: impl std::fmt::Display) -> Self {
        Self::Format { path: path.display().to_string(), message: message.to_string() }
    }
}
