//! # kaf
//!
//! File formats, experiment setups and the command-line driver built on
//! [`kaf_core`].
//!
//! * [`csv_io`]: time-series CSV files (`t,x1,...,xm,y`).
//! * [`model_file`]: self-contained binary model files.
//! * [`report`]: skill reports as CSV and JSON.
//! * [`config`]: `key = value` option files and sectioned recipes.
//! * [`experiments`]: reference circle and Lorenz 63 setups.
//! * [`commands`]: the `kaf` subcommands.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod experiments;
pub mod model_file;
pub mod report;

/// Invalid invocation; the binary exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Exit status for a failed command: 2 for usage errors, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<UsageError>()) {
        2
    } else {
        1
    }
}
