//! Experiment harness for the `magsplit` integrators: configuration files,
//! built-in setups, step-size sweeps, long runs and reference trajectories.

pub mod check;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod longrun;
pub mod output;
pub mod reference;
pub mod sweep;

pub use config::{ExperimentConfig, ExperimentId, MethodEntry, Observable, TimeUnit};
pub use error::{HarnessError, Result};
pub use experiments::{builtin_experiment, Scale, Units};
