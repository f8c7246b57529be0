//! Library surface of the `flexrec` command-line harness, exposed so the
//! integration and acceptance suites can drive the commands directly.

pub mod commands;
pub mod config;
pub mod report;

pub use config::ExperimentConfig;
