//! Batch runner for the `dysonprop` checks: argument parsing, command
//! execution and report emission.

pub mod args;
pub mod commands;
pub mod report;

pub use args::{parse_args, Cli, Command};
pub use commands::run_command;
pub use report::{emit_report, render, Criterion, Format, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dysonprop::Error),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: dysonprop::Error,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent report: {0}")]
    Report(String),
}

impl CliError {
    pub fn context(context: impl Into<String>, source: dysonprop::Error) -> Self {
        CliError::Context { context: context.into(), source }
    }
}
