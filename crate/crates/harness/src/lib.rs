//! Configuration, data generation, experiment runs and serialization for `ymlab`.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod run;

pub use config::{load_config, ExperimentConfig, Kind, Strictness};
pub use error::HarnessError;
pub use run::{execute, run};
