//! Config-driven experiment runner for the mean curvature flow lab.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod report;
pub mod session;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
pub use session::{resume, run_experiment, Outcome};
