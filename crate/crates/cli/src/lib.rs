//! Config-driven experiment runner over `frachardy-core`.

pub mod checks;
pub mod commands;
pub mod config;
pub mod manifest;

pub use config::ExperimentConfig;
