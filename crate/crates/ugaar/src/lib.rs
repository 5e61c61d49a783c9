//! File formats, report rendering and the command-line pipeline built on
//! `ugaar-core`.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod features;
pub mod files;
pub mod plot;

pub use error::{AppError, AppResult, FormatError};
