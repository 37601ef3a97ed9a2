//! Standard-library companion to `branchruin-core`: the tree file format,
//! tree sources, experiment configs, the phase sweep and the command-line
//! front end.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod scheme;
pub mod source;
pub mod sweep;

pub use error::CliError;

/// Embedded in every report.
pub const VERSION: &str = concat!("branchruin ", env!("CARGO_PKG_VERSION"));
