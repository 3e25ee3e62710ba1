//! Command-line runner: reads an experiment config, runs it with a seeded
//! execution context and writes result tables into an output directory.

pub mod commands;
pub mod config;
mod setup;

pub use commands::{run, Command, InspectKind, ListKind, RunSettings};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The config does not parse or refers to something that does not exist.
    #[error("config error at '{path}': {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Run(#[from] mlkit::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::Config { path: path.to_string(), message: message.into() }
    }

    /// 2 for config errors, 3 for learner failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Run(mlkit::Error::LearnerFailed { .. } | mlkit::Error::Numerical(_)) => 3,
            _ => 1,
        }
    }
}
