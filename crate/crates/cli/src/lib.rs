//! Batch pipeline around the `epinp` samplers: configuration, CSV
//! import/export, chain orchestration and posterior summaries.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod summary;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{run, Command};
