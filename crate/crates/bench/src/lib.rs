//! Experiment harness for the `fulladagrad` optimizers: configuration,
//! replicated runs, metrics, CSV output and timing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
mod error;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod timing;

pub use config::{BlockSpec, CovSpec, ExperimentConfig, OptimizerSpec};
pub use error::{BenchError, Result};
pub use metrics::{Aggregate, Metric};
pub use output::emit_csv;
pub use runner::{check_invariants, run_classification, run_precond_only, run_simulation};
pub use timing::time_compare;
