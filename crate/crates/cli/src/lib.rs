//! Command-line front end: configuration, subcommands and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{parse_config, Overrides, RawConfig, RunConfig};
pub use error::CliError;
