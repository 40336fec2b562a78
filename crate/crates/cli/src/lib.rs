//! Command-line surface of the eqsmooth toolkit: file formats, command
//! implementations and exit-code mapping. The `eqsmooth` binary is a thin
//! wrapper around [`commands::run`].

pub mod commands;
pub mod error;
pub mod format;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult, EXIT_CAPABILITY, EXIT_INVALID};
