//! Batch front end: config parsing, scenario runs and oracle validation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod validate;

pub use config::{parse_config, parse_config_with, parse_str, Overrides, RunConfig, Scenario};
pub use error::{CliError, Result};
pub use run::{run, Manifest};
pub use validate::{validate, Report};
