//! Configuration, dispatch and reporting for the `infogame` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{Command, RunConfig};
pub use error::{CliError, ConfigError};
pub use report::{Check, RunReport};
pub use run::run;
