//! IO, configuration and benchmark orchestration on top of the `ghuot` core.

pub mod config;
pub mod error;
pub mod formats;
pub mod harness;

pub use error::{CliError, Result};
