//! File formats, stage orchestration and the command line for
//! [`jndmap_core`].
//!
//! Inputs are three CSV tables (`vmaf_scores.csv`, `dcr_ratings.csv`,
//! `jnd_truth.csv`); every stage writes its result as CSV or JSON so that
//! stages can be rerun individually. See [`commands`] for the entry points.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod render;
pub mod report;
pub mod tables;

pub use config::RunConfig;
pub use error::{CliError, Result};
