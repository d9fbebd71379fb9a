//! Command-line front end: configuration schema, artifact writers and the
//! `simulate`, `certify`, `sweep` and `ic-gen` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
