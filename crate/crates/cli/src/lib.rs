//! Config-driven runner: Blasius profile, marching, verification, fits and barrier certificates.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{Command, Overrides, Resolution, RunConfig};
pub use error::{CliError, Result};
pub use pipeline::{run, Gate, Summary};
