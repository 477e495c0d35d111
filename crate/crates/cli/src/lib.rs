//! Experiment runner for `nmf-inpaint`: read a WAV file, remove samples,
//! restore them and write the restored audio with a per-iteration trace and
//! a JSON summary.

pub mod degrade;
pub mod error;
pub mod experiment;
pub mod report;
pub mod wav;

pub use error::{CliError, Result};
pub use experiment::{run_experiment, Degradation, ExperimentSpec, Summary};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
