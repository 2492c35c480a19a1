pub mod cho;
pub mod config;
mod chsolve;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod meanfield;
pub mod output;
pub mod potential;
pub mod reactions;
pub mod stepper;

pub use error::{Error, Result};
