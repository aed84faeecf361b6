//! Run configuration, checkpoint format and subcommands of the `swift` tool.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use checkpoint::{Checkpoint, SavedRun};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
