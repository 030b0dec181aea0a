//! Command-line front end and file formats for `sdwave-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use cli::run;
pub use config::ScenarioConfig;
pub use error::AppError;
