//! Command-line driver for `dsmrf`: config parsing, deterministic sweeps and
//! CSV/SVG output.

pub mod commands;
pub mod config;
mod error;
pub mod svg;
pub mod table;

pub use error::{CliError, Result};

/// Exit code when some rows failed but the rest were written.
pub const EXIT_PARTIAL: i32 = 2;
