//! File formats, configuration and subcommands of the `centerkit` tool.

pub mod cli;
pub mod coco;
pub mod commands;
pub mod config;
pub mod error;
pub mod ochm;
pub mod records;
pub mod selftest;

pub use config::{ConfigArgs, RunConfig};
pub use error::{CliError, Result};
