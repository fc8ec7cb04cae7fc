//! Experiment runner: configuration files, statistics tables, single-path
//! traces and ODE dumps.

pub mod commands;
pub mod config;

pub use config::{emit, parse_config, ConfigError, RunConfig};
