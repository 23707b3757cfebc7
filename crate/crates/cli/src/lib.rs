//! Command-line front end for sirwave: configuration, run directories with
//! manifests, sweeps and replay.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod replay;
pub mod sweep;

pub use config::RunConfig;
pub use error::{CliError, RunStatus};
