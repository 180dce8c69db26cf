//! Command-line front end for self-correcting retraining experiments:
//! TOML experiment files in, deterministic CSV tables out.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod validate;

pub use error::{CliError, Result};
