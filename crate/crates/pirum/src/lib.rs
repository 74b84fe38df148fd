//! File formats, configuration and the command line for `pirum-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod spec;

pub use error::{Error, Result};
