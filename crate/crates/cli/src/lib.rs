//! Reproducible experiments over the pwkit toolkit: config files in,
//! JSON/CSV (and optionally SVG) artifacts out.

pub mod artifact;
pub mod config;
pub mod describe;
pub mod error;
pub mod plot;
pub mod run;

pub use config::{Claim, Experiment, ExperimentConfig, SignalSpec, Tolerances};
pub use describe::{describe_catalog, CatalogDescription};
pub use error::{CliError, CliResult};
pub use run::{run_experiment, RunOutcome, Status};
