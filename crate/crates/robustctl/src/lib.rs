//! Configuration, orchestration, reports and the command-line front end of
//! the robust stochastic control laboratory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod executor;
pub mod pipeline;
pub mod registry;

pub use config::{load_config, parse_config, RunConfig};
pub use error::CliError;
pub use executor::Parallel;
pub use pipeline::{emit_report, run_command, Command, Report};
