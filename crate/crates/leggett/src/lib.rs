//! File formats, parallel drivers and the batch command harness around
//! [`leggett_core`].
//!
//! Every command takes an [`ExperimentConfig`] (one JSON document, unknown
//! keys rejected, with command-line overrides applied) and returns a
//! [`CommandOutput`]. Outputs embed the tool version, the seed and a hash of
//! the effective configuration, and are byte-identical for identical input.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;

pub use commands::{CommandOutput, ExitStatus};
pub use config::ExperimentConfig;
pub use error::CliError;

/// `leggett <version>`, embedded in every output.
pub fn tool_version() -> String {
    format!("leggett {}", env!("CARGO_PKG_VERSION"))
}
