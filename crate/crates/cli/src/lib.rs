// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! File formats, worker pool, acceptance suite and command implementations
//! behind the `delay-horizon` binary.

pub mod acceptance;
pub mod commands;
pub mod error;
pub mod formats;
pub mod pool;

pub use error::CliError;
