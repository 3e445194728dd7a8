//! Experiment runner for multi-resolution traffic models.
//!
//! The `mssm` binary is a thin argument parser over [`commands`]; the same
//! functions back the acceptance suite.

pub mod check;
pub mod commands;
pub mod config;
pub mod data;

pub use commands::Outcome;
pub use config::RunConfig;
