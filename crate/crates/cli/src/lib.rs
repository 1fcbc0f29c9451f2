//! Command-line front end: scenario documents, instrument persistence,
//! contingency ingestion and JSON reports.

pub mod commands;
pub mod contingency;
pub mod document;
pub mod error;
pub mod report;
pub mod scenario;

pub use commands::run;
pub use document::{load_instrument, persist_instrument};
pub use error::{CliError, CliResult};
pub use scenario::{parse_scenario, serialize_scenario, Scenario};
