//! Experiments, file formats and the `kinetic` command line on top of
//! [`kinetic_core`].
//!
//! * [`config`]: JSON experiment configurations.
//! * [`parallel`]: the worker pool.
//! * [`experiments`]: simulations behind each subcommand.
//! * [`verify`]: pass/fail suites built on those experiments.
//! * [`table`]: CSV output with a metadata header.

pub mod config;
pub mod error;
pub mod experiments;
pub mod parallel;
pub mod presets;
pub mod table;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{KineticError, Result};
pub use verify::{Suite, SuiteOutcome, TestReport};
