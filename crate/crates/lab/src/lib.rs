//! Configuration, pipelines, report formats and the command line for the
//! `sublap-core` numerics.

// `!(x <= y)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipelines;
pub mod polynomial;
pub mod report;
pub mod run;
pub mod volume;

pub use config::ExperimentConfig;
pub use error::LabError;
pub use report::RunReport;
pub use run::{execute, Pipeline, RunOptions, RunOutcome};
