//! Harness around `uir-core`: synthetic data under the uncoupled model,
//! benchmarks against sorting and coupled isotonic regression, the
//! numerical diagnostics sweep, and CSV/SVG output.

pub mod bench;
pub mod config;
pub mod data;
pub mod diagnose;
pub mod emit;
pub mod error;

pub use error::{CliError, CliResult};
