//! Experiment harness for the crowd-labelling game: TOML configs, the
//! subcommands behind the `crowdgame` binary, and versioned CSV output.

pub mod commands;
pub mod config;
pub mod csv_out;
pub mod sweeps;

pub use commands::{CliError, Loaded, Output, Overrides};
pub use config::{ConfigError, ExperimentConfig};
