//! File formats, TuSimple label IO and the subcommands behind the `lanecli`
//! binary. The numerical work all lives in [`lanefield`].

pub mod commands;
pub mod error;
pub mod files;
pub mod manifest;

pub use commands::Command;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
