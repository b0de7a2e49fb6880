//! File formats, instance generators and command implementations behind
//! the `qre` binary.

pub mod bench;
pub mod commands;
pub mod error;
pub mod generate;
pub mod problem;
pub mod report;

pub use error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
