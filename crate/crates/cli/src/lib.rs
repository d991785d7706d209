//! Command-line front end: problem files, run reports and subcommands.

pub mod commands;
pub mod problem;
pub mod report;

pub use commands::{run, Cli, EXIT_ASSERTION, EXIT_INPUT, EXIT_OK};
