//! Command-line front end for `prepost-core`: CSV ingestion, estimate
//! reports, configuration files and the simulation campaigns.

pub mod campaign;
pub mod cli;
pub mod config;
pub mod error;
pub mod input;
pub mod output;
pub mod report;

pub use cli::run;
pub use error::{CliError, Result};
