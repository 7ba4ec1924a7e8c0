//! Std-side companion to `radiomap-core`: file formats and the `radiomap`
//! command-line pipeline.

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod heatmap;
pub mod model;
mod viridis;

pub use error::{CliError, Result};
