//! Configuration-driven experiment runner for the `fastflow` sampler.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod error;
pub mod report;

pub use config::ExperimentConfig;
pub use error::CliError;
