#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Library surface of the experiment runner, so suites can drive
//! experiments in-process.

pub mod artifacts;
pub mod checkpoint;
pub mod config;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use runner::{run, RunOutput};
