//! Command-line front end: configuration parsing, object and image files,
//! and the `simulate`, `calibrate`, `magnify` and `oracle-check` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{run, Command, Outcome};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
