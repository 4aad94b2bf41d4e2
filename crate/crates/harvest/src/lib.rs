//! Command-line side of the harvester toolkit: JSON run configurations,
//! parallel ensembles and sweeps, and CSV output with provenance records.

pub mod commands;
pub mod config;
pub mod ensemble;
pub mod output;
pub mod sweep;

pub use commands::{run, Options, Outcome, Subcommand};
pub use config::{load_config, parse_config, ConfigError, Loaded, RunConfig};
