//! Command-line front end: config loading, run-stamped outputs, figure
//! bundles and the subcommands behind the `vat` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;

pub use commands::{cmd_elicit, cmd_figures, cmd_mock_server, cmd_pipeline, cmd_robustness, cmd_split, cmd_synth};
pub use error::{CliError, ExitKind};
