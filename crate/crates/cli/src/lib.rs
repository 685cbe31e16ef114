//! Scenario files, CSV output and the `platoon` command implementations.

pub mod commands;
pub mod format;
pub mod scenario_file;

pub use commands::{run, Cli, CliError, Command};
pub use format::{format_number, SIGNIFICANT_DIGITS};
pub use scenario_file::{parse_document, parse_scenario, serialize_scenario, LoadError, ParseError, ScenarioFile};
