//! The `feedlab` command-line tool: workspace handling, the HTTP service,
//! an HTTP client for the participant API, and the subcommands.

pub mod cli;
pub mod client;
pub mod commands;
pub mod error;
pub mod openai;
pub mod server;
pub mod workspace;

pub use error::{CliError, Result};
