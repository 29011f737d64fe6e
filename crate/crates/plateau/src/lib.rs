//! Command-line front end for `plateau-core`: config files, a threaded
//! executor, CSV/JSON output and the experiment commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod executor;
pub mod record;
