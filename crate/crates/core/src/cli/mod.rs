//! Experiment harness: `run <subcommand> <config.toml>`.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Table};
pub use config::ExperimentConfig;

/// Process exit code for an error: 2 for bad input, 3 for numerical failure.
pub fn exit_code(err: &crate::Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}
