//! Experiment configuration, rate fitting and report emission.

pub mod config;
pub mod fit;
pub mod run;

pub use config::{DensitySpec, ExperimentConfig, ExperimentKind, PointFamily, SCHEMA_VERSION};
pub use fit::{fit_exponent, ScalingFit};
pub use run::{run, write_reports, Check, RunOutput, Summary, Table};
